//! `ZDDM` checkpoint: magic, version u16, feature/class/hidden dims as u32,
//! then `layer1.weight`, `layer1.bias`, `layer2.weight`, `layer2.bias` as
//! row-major f32, all little-endian. Dropout and slope live in the sidecar.

use std::path::Path;

use crate::checkpoint::{write_sidecar, Reader, Sidecar, Writer};
use crate::error::Result;
use crate::numerics::ParamStore;

use super::model::DiffusionModel;
use super::train::DiffusionTrainConfig;

pub const DIFFUSION_MAGIC: &[u8; 4] = b"ZDDM";

pub fn save_diffusion(
    path: impl AsRef<Path>,
    model: &DiffusionModel,
    sidecar: &Sidecar<DiffusionTrainConfig>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = Writer::default();
    w.magic(DIFFUSION_MAGIC);
    w.u32(model.feature_dim());
    w.u32(model.class_dim());
    w.u32(model.hidden_dim());
    for (_, t) in model.params().iter() {
        w.tensor(t);
    }
    w.save(path)?;
    write_sidecar(path, sidecar)
}

pub fn load_diffusion(path: impl AsRef<Path>) -> Result<DiffusionModel> {
    let mut r = Reader::open(path.as_ref(), DIFFUSION_MAGIC)?;
    let feature_dim = r.u32()?;
    let class_dim = r.u32()?;
    let hidden = r.u32()?;
    let mut params = ParamStore::new();
    params.push("layer1.weight", r.tensor(feature_dim + class_dim, hidden)?);
    params.push("layer1.bias", r.tensor(1, hidden)?);
    params.push("layer2.weight", r.tensor(hidden, feature_dim)?);
    params.push("layer2.bias", r.tensor(1, feature_dim)?);
    r.finish()?;
    let mut model = DiffusionModel::from_params(feature_dim, class_dim, hidden, params)?;
    if let Ok(sidecar) = crate::checkpoint::read_sidecar::<DiffusionTrainConfig>(path.as_ref()) {
        model.dropout_rate = sidecar.config.dropout;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn roundtrip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.zddm");
        let model = DiffusionModel::new(6, 4, 5, &mut Rng::new(3));
        let sidecar = Sidecar {
            format: "ZDDM".into(),
            fingerprint: "abc".into(),
            seed: 3,
            config: DiffusionTrainConfig::default(),
        };
        save_diffusion(&path, &model, &sidecar).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"ZDDM");
        assert_eq!(bytes.len(), 6 + 12 + 4 * (10 * 5 + 5 + 5 * 6 + 6));

        let back = load_diffusion(&path).unwrap();
        for ((_, a), (_, b)) in model.params().iter().zip(back.params().iter()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        let meta: Sidecar<DiffusionTrainConfig> = crate::checkpoint::read_sidecar(&path).unwrap();
        assert_eq!(meta, sidecar);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus");
        std::fs::write(&path, b"ZDCM\x01\x00").unwrap();
        assert!(load_diffusion(&path).is_err());
    }
}
