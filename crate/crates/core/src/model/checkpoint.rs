//! Checkpoint directories: `config.json` plus one float32 tensor file per
//! named parameter (`<name>.bin`) and the null text feature.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{ModelConfig, Parameterized, ViML};
use crate::error::{Error, Result};
use crate::features::tensor_file;

pub const CONFIG_FILE: &str = "config.json";
pub const NULL_TEXT_TENSOR: &str = "null_text";

pub fn save_checkpoint(model: &ViML<f32>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(CONFIG_FILE),
        serde_json::to_string_pretty(model.config())?,
    )?;
    let mut failure = None;
    model.visit("", &mut |name, p| {
        if failure.is_none() {
            if let Err(e) = tensor_file::write(&dir.join(format!("{name}.bin")), &p.value) {
                failure = Some(e);
            }
        }
    });
    if let Some(e) = failure {
        return Err(Error::Checkpoint(e.to_string()));
    }
    let null = model.null_text().clone().insert_axis(ndarray::Axis(0));
    tensor_file::write(&dir.join(format!("{NULL_TEXT_TENSOR}.bin")), &null)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<ViML<f32>> {
    let config_path = dir.join(CONFIG_FILE);
    if !config_path.exists() {
        return Err(Error::Checkpoint(format!(
            "missing {}",
            config_path.display()
        )));
    }
    let config: ModelConfig = serde_json::from_str(&fs::read_to_string(&config_path)?)
        .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
    let mut model = ViML::<f32>::new(config.clone(), 0)?;

    let mut tensors = BTreeMap::new();
    let mut failure: Option<Error> = None;
    model.visit("", &mut |name, p| {
        if failure.is_some() {
            return;
        }
        let path = dir.join(format!("{name}.bin"));
        match tensor_file::read(&path) {
            Ok(m) if m.dim() == p.value.dim() => {
                tensors.insert(name.to_string(), m);
            }
            Ok(m) => {
                failure = Some(Error::Checkpoint(format!(
                    "{name}: config implies {:?} but file holds {:?}",
                    p.value.dim(),
                    m.dim()
                )))
            }
            Err(e) => failure = Some(Error::Checkpoint(format!("{name}: {e}"))),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    model.visit_mut("", &mut |name, p| {
        p.value = tensors.remove(name).expect("read above");
    });

    let null = tensor_file::read(&dir.join(format!("{NULL_TEXT_TENSOR}.bin")))
        .map_err(|e| Error::Checkpoint(format!("{NULL_TEXT_TENSOR}: {e}")))?;
    if null.dim() != (1, config.base_dims.text) {
        return Err(Error::Checkpoint(format!(
            "{NULL_TEXT_TENSOR}: expected 1x{}, found {:?}",
            config.base_dims.text,
            null.dim()
        )));
    }
    model.set_null_text(null.row(0).to_owned());
    model.config_mut().null_text = config.null_text;
    Ok(model)
}
