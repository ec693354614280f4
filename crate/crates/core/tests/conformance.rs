use std::path::PathBuf;

use cinesplat::compress::{conformance_containers, decode, params_bytes, read_f64s, render_bytes, VectorManifest};

fn vectors_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/vectors")
}

fn manifest() -> VectorManifest {
    let text = std::fs::read_to_string(vectors_dir().join("manifest.json")).expect("manifest present");
    serde_json::from_str(&text).expect("manifest parses")
}

#[test]
fn checked_in_vectors_decode_and_render() {
    let m = manifest();
    assert!(!m.vectors.is_empty());
    for v in &m.vectors {
        let read = |ext: &str| std::fs::read(vectors_dir().join(format!("{}.{ext}", v.name))).unwrap();
        let scene = decode(&read("cgsv")).unwrap_or_else(|e| panic!("{}: {e}", v.name));
        assert_eq!(scene.len(), v.count, "{}", v.name);
        assert_eq!(scene.sh_degree, v.sh_degree, "{}", v.name);
        assert_eq!(scene.mip.is_some(), v.mip, "{}", v.name);
        assert!(params_bytes(&scene) == read("params"), "{}: decoded parameters differ", v.name);

        let want = read_f64s(&read("rgba")).unwrap();
        let got = read_f64s(&render_bytes(&scene, &v.camera)).unwrap();
        assert_eq!(want.len(), 4 * v.camera.width * v.camera.height);
        let err = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9, "{}: render differs by {err}", v.name);
    }
}

#[test]
fn regenerated_vectors_match_checked_in() {
    let m = manifest();
    let fresh = conformance_containers().unwrap();
    assert_eq!(fresh.len(), m.vectors.len());
    for ((entry, bytes), v) in fresh.iter().zip(&m.vectors) {
        assert_eq!(entry, v);
        let want = std::fs::read(vectors_dir().join(format!("{}.params", v.name))).unwrap();
        assert!(params_bytes(&decode(bytes).unwrap()) == want, "{}", v.name);
    }
}

#[test]
fn vectors_cover_both_index_widths() {
    let m = manifest();
    let wide = m.vectors.iter().any(|v| {
        let bytes = std::fs::read(vectors_dir().join(format!("{}.cgsv", v.name))).unwrap();
        let (_, chunks) = cinesplat::compress::read_container(&bytes).unwrap();
        chunks.iter().any(|c| &c.id == b"SHIX" && c.data.len() == 2 * v.count)
    });
    assert!(wide, "no vector exercises u16 codebook indices");
}
