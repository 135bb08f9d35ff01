//! Versioned binary serialization for boosted models: a short header
//! followed by per-tree node arrays.

use std::io::{Read, Write};

use super::gbdt::GbdtModel;
use super::tree::{Node, Tree};
use super::twostep::TwoStepModel;
use super::BoostError;

const GBDT_MAGIC: &[u8; 4] = b"GBDT";
const TWOSTEP_MAGIC: &[u8; 4] = b"2STP";
const VERSION: u32 = 1;

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, BoostError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| BoostError::BadModelFile("non-UTF-8 name".to_string()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, BoostError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, BoostError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn write_gbdt<W: Write>(w: &mut W, model: &GbdtModel) -> std::io::Result<()> {
    w.write_all(GBDT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&model.learning_rate.to_le_bytes())?;
    w.write_all(&model.base_score.to_le_bytes())?;
    w.write_all(&(model.feature_names.len() as u32).to_le_bytes())?;
    for name in &model.feature_names {
        write_str(w, name)?;
    }
    w.write_all(&(model.trees.len() as u32).to_le_bytes())?;
    for tree in &model.trees {
        w.write_all(&(tree.nodes.len() as u32).to_le_bytes())?;
        for node in &tree.nodes {
            match node {
                Node::Leaf { value } => {
                    w.write_all(&[0u8])?;
                    w.write_all(&value.to_le_bytes())?;
                }
                Node::Split { feature, threshold, left, right } => {
                    w.write_all(&[1u8])?;
                    w.write_all(&(*feature as u32).to_le_bytes())?;
                    w.write_all(&threshold.to_le_bytes())?;
                    w.write_all(&(*left as u32).to_le_bytes())?;
                    w.write_all(&(*right as u32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_gbdt<R: Read>(r: &mut R) -> Result<GbdtModel, BoostError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GBDT_MAGIC {
        return Err(BoostError::BadModelFile("bad magic".to_string()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(BoostError::BadModelFile(format!("unsupported version {version}")));
    }
    let learning_rate = read_f64(r)?;
    let base_score = read_f64(r)?;
    let n_features = read_u32(r)? as usize;
    let mut feature_names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        feature_names.push(read_str(r)?);
    }
    let n_trees = read_u32(r)? as usize;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = read_u32(r)? as usize;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            match tag[0] {
                0 => {
                    let value = read_f64(r)?;
                    if !value.is_finite() {
                        return Err(BoostError::BadModelFile("non-finite leaf".to_string()));
                    }
                    nodes.push(Node::Leaf { value });
                }
                1 => {
                    let feature = read_u32(r)? as usize;
                    if feature >= n_features {
                        return Err(BoostError::BadModelFile(format!(
                            "split feature {feature} out of range"
                        )));
                    }
                    let threshold = read_f64(r)?;
                    let left = read_u32(r)? as usize;
                    let right = read_u32(r)? as usize;
                    if left >= n_nodes || right >= n_nodes {
                        return Err(BoostError::BadModelFile("child index out of range".into()));
                    }
                    nodes.push(Node::Split { feature, threshold, left, right });
                }
                t => return Err(BoostError::BadModelFile(format!("unknown node tag {t}"))),
            }
        }
        trees.push(Tree { nodes });
    }
    Ok(GbdtModel { trees, learning_rate, base_score, feature_names })
}

pub fn write_two_step<W: Write>(w: &mut W, model: &TwoStepModel) -> std::io::Result<()> {
    w.write_all(TWOSTEP_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&model.stage1_threshold.to_le_bytes())?;
    w.write_all(&model.stage2_threshold.to_le_bytes())?;
    write_gbdt(w, &model.stage1)?;
    write_gbdt(w, &model.stage2)
}

pub fn read_two_step<R: Read>(r: &mut R) -> Result<TwoStepModel, BoostError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TWOSTEP_MAGIC {
        return Err(BoostError::BadModelFile("bad magic".to_string()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(BoostError::BadModelFile(format!("unsupported version {version}")));
    }
    let stage1_threshold = read_f64(r)?;
    let stage2_threshold = read_f64(r)?;
    if !(0.0..=1.0).contains(&stage1_threshold) || !(0.0..=1.0).contains(&stage2_threshold) {
        return Err(BoostError::BadModelFile("threshold outside [0, 1]".to_string()));
    }
    let stage1 = read_gbdt(r)?;
    let stage2 = read_gbdt(r)?;
    Ok(TwoStepModel { stage1, stage2, stage1_threshold, stage2_threshold })
}

pub fn save_two_step(path: &std::path::Path, model: &TwoStepModel) -> Result<(), BoostError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_two_step(&mut file, model)?;
    Ok(())
}

pub fn load_two_step(path: &std::path::Path) -> Result<TwoStepModel, BoostError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_two_step(&mut file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::gbdt::GbdtParams;
    use crate::boost::synth::{generate_two_stage, SynthParams};
    use crate::boost::twostep::{fit_two_step, TwoStepParams};

    fn trained_model() -> (TwoStepModel, crate::boost::synth::SynthData) {
        let data = generate_two_stage(&SynthParams { n: 300, seed: 12, ..SynthParams::default() });
        let params = TwoStepParams {
            gbdt: GbdtParams { n_trees: 8, min_leaf: 5, ..GbdtParams::default() },
            ..TwoStepParams::default()
        };
        let model = fit_two_step(&data.x, &data.labels, &data.feature_names, &params).unwrap();
        (model, data)
    }

    #[test]
    fn roundtrip_preserves_the_model_exactly() {
        let (model, data) = trained_model();
        let mut buf = Vec::new();
        write_two_step(&mut buf, &model).unwrap();
        let restored = read_two_step(&mut buf.as_slice()).unwrap();
        assert_eq!(model, restored);
        assert_eq!(model.predict(&data.x), restored.predict(&data.x));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = read_two_step(&mut &b"NOPE\x01\x00\x00\x00"[..]).unwrap_err();
        assert!(matches!(err, BoostError::BadModelFile(_)));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (model, _) = trained_model();
        let mut buf = Vec::new();
        write_two_step(&mut buf, &model).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(read_two_step(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn corrupt_child_index_is_rejected() {
        let (model, _) = trained_model();
        let mut buf = Vec::new();
        write_gbdt(&mut buf, &model.stage1).unwrap();
        // Find the first split node tag and point its left child out of range.
        // Layout is deterministic, so flipping bytes near the end suffices to
        // corrupt an index or a tag.
        let last = buf.len() - 1;
        buf[last] = 0xFF;
        buf[last - 1] = 0xFF;
        assert!(read_gbdt(&mut buf.as_slice()).is_err());
    }
}
