//! Binary persistence for trained networks.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SEMCOMNN"
//! 8       4     format version (u32, currently 1)
//! 12      4     layer count (u32)
//! ...per layer, in forward order:
//!         4     in_dim (u32)
//!         4     out_dim (u32)
//!         1     activation tag (0 linear, 1 relu, 2 sigmoid, 3 tanh, 4 softmax)
//!         8*out_dim*in_dim   weights, row-major (out, in): row o holds the
//!                            input weights of output unit o
//!         8*out_dim          biases
//! ```
//!
//! Weights are stored as full `f64`, so a load/save round trip is exact and
//! a reloaded network reproduces the original bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::numerics::{Activation, DenseLayer, Matrix, Network};

const MAGIC: &[u8; 8] = b"SEMCOMNN";
const VERSION: u32 = 1;

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(net.layers().len() as u32)?;
    for layer in net.layers() {
        w.write_u32::<LittleEndian>(layer.in_dim() as u32)?;
        w.write_u32::<LittleEndian>(layer.out_dim() as u32)?;
        w.write_u8(layer.activation.tag())?;
        for &v in layer.weights.data() {
            w.write_f64::<LittleEndian>(v)?;
        }
        for &b in &layer.bias {
            w.write_f64::<LittleEndian>(b)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    let mut r = BufReader::new(
        File::open(path).map_err(|e| Error::MissingInput(format!("{}: {}", path.display(), e)))?,
    );
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::parse(path, "file too short for header"))?;
    if &magic != MAGIC {
        return Err(Error::parse(path, "bad magic; not a network weight file"));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::parse(path, "missing version"))?;
    if version != VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported format version {} (expected {})", version, VERSION),
        ));
    }
    let layer_count = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::parse(path, "missing layer count"))? as usize;
    if layer_count == 0 || layer_count > 64 {
        return Err(Error::parse(path, format!("implausible layer count {}", layer_count)));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for k in 0..layer_count {
        let in_dim = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::parse(path, format!("layer {}: missing in_dim", k)))?
            as usize;
        let out_dim = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::parse(path, format!("layer {}: missing out_dim", k)))?
            as usize;
        if in_dim == 0 || out_dim == 0 || in_dim * out_dim > (1 << 28) {
            return Err(Error::parse(
                path,
                format!("layer {}: implausible shape {}x{}", k, out_dim, in_dim),
            ));
        }
        let tag = r
            .read_u8()
            .map_err(|_| Error::parse(path, format!("layer {}: missing activation", k)))?;
        let activation = Activation::from_tag(tag)
            .map_err(|_| Error::parse(path, format!("layer {}: unknown activation tag {}", k, tag)))?;
        let mut weights = vec![0.0; out_dim * in_dim];
        r.read_f64_into::<LittleEndian>(&mut weights)
            .map_err(|_| Error::parse(path, format!("layer {}: truncated weights", k)))?;
        let mut bias = vec![0.0; out_dim];
        r.read_f64_into::<LittleEndian>(&mut bias)
            .map_err(|_| Error::parse(path, format!("layer {}: truncated bias", k)))?;
        layers.push(DenseLayer::from_parts(
            Matrix::from_vec(out_dim, in_dim, weights)?,
            bias,
            activation,
        )?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::parse(path, "trailing bytes after last layer"));
    }
    Network::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_net() -> Network {
        let mut rng = crate::rng::stream(21, "weights-io-test", 0, 0);
        Network::glorot(
            &[7, 5, 3],
            &[Activation::Relu, Activation::Softmax],
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = sample_net();
        save_network(&net, &path).unwrap();
        let loaded = load_network(&path).unwrap();
        assert_eq!(net, loaded);
        // Bit-exactness of outputs, not just approximate equality.
        let x = Matrix::from_vec(2, 7, (0..14).map(|i| i as f64 * 0.1 - 0.7).collect()).unwrap();
        let a = net.forward(&x).unwrap();
        let b = loaded.forward(&x).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        save_network(&sample_net(), &path).unwrap();

        // Corrupt magic.
        let bytes = std::fs::read(&path).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_network(&path), Err(Error::Parse { .. })));

        // Wrong version.
        let mut bad = bytes.clone();
        bad[8] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_network(&path), Err(Error::Parse { .. })));

        // Truncated payload.
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_network(&path), Err(Error::Parse { .. })));

        // Trailing garbage.
        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(matches!(load_network(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_is_a_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_network(&dir.path().join("nope.bin")),
            Err(Error::MissingInput(_))
        ));
    }
}
