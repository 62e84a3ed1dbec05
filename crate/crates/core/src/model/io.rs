use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CoupledKernel;
use crate::error::{Error, Result};
use crate::json::{to_string_with_digits, MODEL_DIGITS};

/// On-disk model document.
///
/// `kernel` holds `(size²)^order` rows in context packing order, each row
/// `size²` probabilities in pair packing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub alphabet_size: usize,
    pub order: usize,
    pub kernel: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positivity_floor: Option<f64>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!(
                "model file, line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(to_string_with_digits(self, MODEL_DIGITS)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<CoupledKernel<f64>> {
        CoupledKernel::from_rows(
            self.alphabet_size,
            self.order,
            self.kernel.clone(),
            self.positivity_floor,
        )
    }

    pub fn from_kernel(kernel: &CoupledKernel<f64>) -> Self {
        Self {
            alphabet_size: kernel.alphabet().size(),
            order: kernel.order(),
            kernel: kernel.rows().map(<[f64]>::to_vec).collect(),
            positivity_floor: kernel.positivity_floor(),
        }
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let text = self.to_json().expect("model serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
