//! `ZDCM` checkpoint: magic, version u16, variant u8 (0 non-linear, 1
//! bilinear), feature/hidden/class dims as u32, then `A`, `B` or `W` as
//! row-major f32, all little-endian.

use std::path::Path;

use crate::checkpoint::{write_sidecar, Reader, Sidecar, Writer};
use crate::error::{Error, Result};

use super::model::{CompatibilityModel, Variant};
use super::train::ClassifierTrainConfig;

pub const CLASSIFIER_MAGIC: &[u8; 4] = b"ZDCM";

pub fn save_classifier(
    path: impl AsRef<Path>,
    model: &CompatibilityModel,
    sidecar: &Sidecar<ClassifierTrainConfig>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = Writer::default();
    w.magic(CLASSIFIER_MAGIC);
    w.u8(match model.variant() {
        Variant::Nonlinear => 0,
        Variant::Bilinear => 1,
    });
    w.u32(model.feature_dim());
    w.u32(model.hidden_dim());
    w.u32(model.class_dim());
    for (_, t) in model.params().iter() {
        w.tensor(t);
    }
    w.save(path)?;
    write_sidecar(path, sidecar)
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<CompatibilityModel> {
    let mut r = Reader::open(path.as_ref(), CLASSIFIER_MAGIC)?;
    let variant = match r.u8()? {
        0 => Variant::Nonlinear,
        1 => Variant::Bilinear,
        tag => return Err(Error::format(None, format!("unknown classifier variant tag {tag}"))),
    };
    let feature_dim = r.u32()?;
    let hidden = r.u32()?;
    let class_dim = r.u32()?;
    let weights = match variant {
        Variant::Nonlinear => vec![r.tensor(feature_dim, hidden)?, r.tensor(hidden, class_dim)?],
        Variant::Bilinear => vec![r.tensor(feature_dim, class_dim)?],
    };
    r.finish()?;
    CompatibilityModel::from_weights(variant, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn roundtrip_both_variants() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(8);
        for model in [
            CompatibilityModel::nonlinear(5, 3, 4, &mut rng),
            CompatibilityModel::bilinear(5, 4, &mut rng),
        ] {
            let path = dir.path().join("c.zdcm");
            let sidecar = Sidecar {
                format: "ZDCM".into(),
                fingerprint: "f".into(),
                seed: 8,
                config: ClassifierTrainConfig::ale(),
            };
            save_classifier(&path, &model, &sidecar).unwrap();
            let back = load_classifier(&path).unwrap();
            assert_eq!(back.variant(), model.variant());
            assert_eq!(back.params().shapes(), model.params().shapes());
            for ((_, a), (_, b)) in model.params().iter().zip(back.params().iter()) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    assert_eq!(*x as f32, *y as f32);
                }
            }
            let meta: Sidecar<ClassifierTrainConfig> = crate::checkpoint::read_sidecar(&path).unwrap();
            assert_eq!(meta, sidecar);
        }
    }

    #[test]
    fn unknown_variant_tag_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.zdcm");
        let mut bytes = b"ZDCM\x01\x00\x07".to_vec();
        bytes.extend_from_slice(&[0; 12]);
        std::fs::write(&path, bytes).unwrap();
        assert!(load_classifier(&path).is_err());
    }
}
