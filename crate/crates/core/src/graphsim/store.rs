//! Persistence for embedding tables and similarity tables.
//!
//! Embedding file layout: magic `N2VE`, u32 version, u32 dimension, u32 node
//! count, then per node a u32 length-prefixed UTF-8 name followed by
//! `dimension` little-endian f32 values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::node2vec::EmbeddingTable;
use super::GraphSimError;

const MAGIC: &[u8; 4] = b"N2VE";
const VERSION: u32 = 1;

pub fn write_embeddings<W: Write>(mut w: W, table: &EmbeddingTable) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(table.dimension as u32).to_le_bytes())?;
    w.write_all(&(table.vectors.len() as u32).to_le_bytes())?;
    for (name, vector) in &table.vectors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        for &x in vector {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_embeddings<R: Read>(mut r: R) -> Result<EmbeddingTable, GraphSimError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GraphSimError::BadEmbeddingFile("wrong magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(GraphSimError::BadEmbeddingFile(format!("unsupported version {version}")));
    }
    let dimension = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let mut vectors = BTreeMap::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|e| GraphSimError::BadEmbeddingFile(format!("bad node name: {e}")))?;
        let mut vector = Vec::with_capacity(dimension);
        for _ in 0..dimension {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)?;
            vector.push(f32::from_le_bytes(buf));
        }
        vectors.insert(name, vector);
    }
    Ok(EmbeddingTable { dimension, vectors })
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn save_embeddings(path: &Path, table: &EmbeddingTable) -> std::io::Result<()> {
    write_embeddings(std::io::BufWriter::new(std::fs::File::create(path)?), table)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, GraphSimError> {
    read_embeddings(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Similarity table: community<TAB>cosine_to_focal, one line per community.
pub fn write_similarity_table<W: Write>(
    mut w: W,
    similarities: &BTreeMap<String, f64>,
) -> std::io::Result<()> {
    writeln!(w, "community\tcosine_to_focal")?;
    for (community, sim) in similarities {
        writeln!(w, "{community}\t{sim}")?;
    }
    Ok(())
}

pub fn read_similarity_table<R: std::io::BufRead>(
    r: R,
) -> Result<BTreeMap<String, f64>, GraphSimError> {
    let mut out = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let community = parts
            .next()
            .ok_or_else(|| GraphSimError::BadEmbeddingFile(format!("bad similarity line {}", i + 1)))?;
        let sim: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| GraphSimError::BadEmbeddingFile(format!("bad similarity line {}", i + 1)))?;
        out.insert(community.to_string(), sim);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_round_trip_is_exact() {
        let mut vectors = BTreeMap::new();
        vectors.insert("alpha".to_string(), vec![1.5f32, -2.25, 0.0]);
        vectors.insert("beta".to_string(), vec![0.1, 0.2, 0.3]);
        let table = EmbeddingTable { dimension: 3, vectors };
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &table).unwrap();
        let back = read_embeddings(&buf[..]).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(read_embeddings(&b"XXXX\x01\x00\x00\x00"[..]).is_err());
    }

    #[test]
    fn similarity_table_round_trip() {
        let mut sims = BTreeMap::new();
        sims.insert("a".to_string(), 0.5);
        sims.insert("b".to_string(), -0.25);
        let mut buf = Vec::new();
        write_similarity_table(&mut buf, &sims).unwrap();
        let back = read_similarity_table(&buf[..]).unwrap();
        assert_eq!(sims, back);
    }
}
