//! Checkpoint files (extension `.msck`), little-endian:
//!
//! ```text
//! magic "MSCK" | version u32 | kind u8 (0 = e2c, 1 = mse2c)
//! | n_z u32 | n_l u32 | k u32 | n_u u32 | nx u32 | ny u32
//! | param_count u32
//! | per param: name_len u32, name utf-8, ndims u32, dims u32[], data f64[]
//! | norm stats: p_min p_max s_min s_max f64, (min, max) f64 per control,
//!   const flags u8 per channel then per control
//! ```
//!
//! Parameters are written in deterministic (lexicographic) order; loading
//! re-derives the expected architecture from the header and rejects any
//! missing, extra or misshapen parameter by name.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::{FormatError, NormStats};
use crate::numerics::{ParamSet, Tensor};

use super::{Hyper, ModelKind, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, model: &ModelParams, stats: &NormStats) -> Result<(), FormatError> {
    model
        .validate()
        .map_err(|e| FormatError::Dimensions(e.to_string()))?;
    if stats.n_controls() != model.hyper.n_u {
        return Err(FormatError::Dimensions(format!(
            "norm stats cover {} controls, model expects {}",
            stats.n_controls(),
            model.hyper.n_u
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u8(match model.hyper.kind {
        ModelKind::E2c => 0,
        ModelKind::Mse2c => 1,
    })?;
    for v in [
        model.hyper.n_z,
        model.hyper.n_l,
        model.hyper.k,
        model.hyper.n_u,
        model.hyper.nx,
        model.hyper.ny,
    ] {
        w.write_u32::<LittleEndian>(v as u32)?;
    }
    w.write_u32::<LittleEndian>(model.params.len() as u32)?;
    for (name, t) in model.params.iter() {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u32::<LittleEndian>(t.shape().len() as u32)?;
        for &d in t.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in t.data() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for v in [stats.p_min, stats.p_max, stats.s_min, stats.s_max] {
        w.write_f64::<LittleEndian>(v)?;
    }
    for c in 0..stats.n_controls() {
        w.write_f64::<LittleEndian>(stats.control_min[c])?;
        w.write_f64::<LittleEndian>(stats.control_max[c])?;
    }
    w.write_u8(stats.p_const as u8)?;
    w.write_u8(stats.s_const as u8)?;
    for &f in &stats.control_const {
        w.write_u8(f as u8)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, NormStats), FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| FormatError::Truncated("missing magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic {
            expected: *CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = read_u32(&mut r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::Version {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let kind = match read_u8(&mut r, "kind")? {
        0 => ModelKind::E2c,
        1 => ModelKind::Mse2c,
        other => return Err(FormatError::Dimensions(format!("unknown model kind tag {other}"))),
    };
    let n_z = read_u32(&mut r, "n_z")? as usize;
    let n_l = read_u32(&mut r, "n_l")? as usize;
    let k = read_u32(&mut r, "k")? as usize;
    let n_u = read_u32(&mut r, "n_u")? as usize;
    let nx = read_u32(&mut r, "nx")? as usize;
    let ny = read_u32(&mut r, "ny")? as usize;
    let hyper = Hyper {
        kind,
        n_z,
        n_l,
        n_u,
        nx,
        ny,
        k,
    };

    let count = read_u32(&mut r, "param count")? as usize;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r, "param name length")? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| FormatError::Truncated("while reading param name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| FormatError::Dimensions("parameter name is not UTF-8".into()))?;
        let ndims = read_u32(&mut r, "param rank")? as usize;
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            shape.push(read_u32(&mut r, "param dim")? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut data)
            .map_err(|_| FormatError::Truncated(format!("while reading data of `{name}`")))?;
        let t = Tensor::new(shape, data)
            .map_err(|e| FormatError::Dimensions(format!("parameter `{name}`: {e}")))?;
        params.insert(name, t);
    }

    let p_min = read_f64(&mut r, "p_min")?;
    let p_max = read_f64(&mut r, "p_max")?;
    let s_min = read_f64(&mut r, "s_min")?;
    let s_max = read_f64(&mut r, "s_max")?;
    let mut control_min = Vec::with_capacity(n_u);
    let mut control_max = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        control_min.push(read_f64(&mut r, "control min")?);
        control_max.push(read_f64(&mut r, "control max")?);
    }
    let p_const = read_u8(&mut r, "p_const")? != 0;
    let s_const = read_u8(&mut r, "s_const")? != 0;
    let mut control_const = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        control_const.push(read_u8(&mut r, "control const flag")? != 0);
    }

    let mut trailing = Vec::new();
    r.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(FormatError::Truncated(format!(
            "{} unexpected trailing bytes",
            trailing.len()
        )));
    }

    let model = ModelParams { hyper, params };
    model
        .validate()
        .map_err(|e| FormatError::Dimensions(e.to_string()))?;
    let stats = NormStats {
        p_min,
        p_max,
        s_min,
        s_max,
        control_min,
        control_max,
        p_const,
        s_const,
        control_const,
    };
    Ok((model, stats))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, FormatError> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| FormatError::Truncated(format!("while reading {what}")))
}

fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8, FormatError> {
    r.read_u8()
        .map_err(|_| FormatError::Truncated(format!("while reading {what}")))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64, FormatError> {
    r.read_f64::<LittleEndian>()
        .map_err(|_| FormatError::Truncated(format!("while reading {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_hyper;
    use crate::model::{init_model, predict_states, PredictMode};

    fn toy_stats(n_u: usize) -> NormStats {
        NormStats {
            p_min: 14e6,
            p_max: 26e6,
            s_min: 0.2,
            s_max: 0.8,
            control_min: vec![0.0; n_u],
            control_max: vec![1.0; n_u],
            p_const: false,
            s_const: false,
            control_const: vec![false; n_u],
        }
    }

    #[test]
    fn roundtrip_restores_params_and_stats_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msck");
        let model = init_model(tiny_hyper(ModelKind::Mse2c), 13).unwrap();
        let stats = toy_stats(3);
        save_checkpoint(&path, &model, &stats).unwrap();
        let (back, back_stats) = load_checkpoint(&path).unwrap();
        assert_eq!(back.hyper, model.hyper);
        assert_eq!(back.params, model.params);
        assert_eq!(back_stats, stats);
    }

    #[test]
    fn reloaded_model_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msck");
        let h = tiny_hyper(ModelKind::E2c);
        let model = init_model(h, 21).unwrap();
        save_checkpoint(&path, &model, &toy_stats(3)).unwrap();
        let (back, _) = load_checkpoint(&path).unwrap();

        let x = Tensor::new(
            vec![2, 8, 8],
            (0..128).map(|i| (i as f64 * 0.07).sin() * 0.5 + 0.5).collect(),
        )
        .unwrap();
        let u = vec![vec![0.4, 0.5, 0.6]; 3];
        let a = predict_states(&model, &x, &u, 3, PredictMode::LinearRollout).unwrap();
        let b = predict_states(&back, &x, &u, 3, PredictMode::LinearRollout).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn header_inconsistent_with_params_names_the_parameter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msck");
        let model = init_model(tiny_hyper(ModelKind::Mse2c), 3).unwrap();
        save_checkpoint(&path, &model, &toy_stats(3)).unwrap();
        // lie about n_z in the header (offset: magic 4 + version 4 + kind 1)
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[9] = 7;
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(FormatError::Dimensions(msg)) => {
                assert!(msg.contains("parameter `"), "{msg}")
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_truncation_are_typed_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msck");
        let model = init_model(tiny_hyper(ModelKind::Mse2c), 3).unwrap();
        save_checkpoint(&path, &model, &toy_stats(3)).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'Z';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(FormatError::BadMagic { .. })));

        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(FormatError::Truncated(_))));
    }
}
