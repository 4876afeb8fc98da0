//! Multipart payloads: bundle trios plus a JSON `params` part.

use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::Multipart;

use crate::error::ApiError;

/// Raw bytes of one uploaded bundle.
#[derive(Debug, Clone)]
pub struct BundleUpload {
    pub prefix: &'static str,
    pub image: Bytes,
    pub landmarks: Bytes,
    pub parsing: Bytes,
}

impl BundleUpload {
    pub fn parts(&self) -> [&[u8]; 3] {
        [&self.image, &self.landmarks, &self.parsing]
    }

    pub fn decode(&self) -> Result<amorph::FaceBundle, ApiError> {
        let field = |part: &str| format!("{}_{part}", self.prefix);
        let image = amorph::io::decode_image(&self.image).map_err(|e| ApiError::engine(e, Some(&field("image"))))?;
        let landmarks =
            amorph::io::decode_landmarks(&self.landmarks).map_err(|e| ApiError::engine(e, Some(&field("landmarks"))))?;
        let parsing = amorph::io::decode_parsing(&self.parsing).map_err(|e| ApiError::engine(e, Some(&field("parsing"))))?;
        amorph::FaceBundle::new(image, landmarks, parsing).map_err(|e| ApiError::engine(e, Some(self.prefix)))
    }
}

pub struct Upload {
    parts: HashMap<String, Bytes>,
}

const BUNDLES: [&str; 3] = ["source", "ref", "ref2"];
const PARTS: [&str; 3] = ["image", "landmarks", "parsing"];

impl Upload {
    pub async fn read(mut multipart: Multipart) -> Result<Self, ApiError> {
        let mut parts = HashMap::new();
        loop {
            let field = match multipart.next_field().await {
                Ok(Some(f)) => f,
                Ok(None) => break,
                Err(e) => return Err(multipart_error(e)),
            };
            let name = field.name().unwrap_or_default().to_string();
            let known = name == "params" || BUNDLES.iter().any(|b| PARTS.iter().any(|p| name == format!("{b}_{p}")));
            if !known {
                return Err(ApiError::bad_request("unknown_field", Some(&name), format!("unexpected multipart field '{name}'")));
            }
            let data = field.bytes().await.map_err(multipart_error)?;
            if parts.insert(name.clone(), data).is_some() {
                return Err(ApiError::bad_request("duplicate_field", Some(&name), format!("field '{name}' given twice")));
            }
        }
        Ok(Self { parts })
    }

    /// Bundle under `prefix`; `None` when none of its parts were sent.
    pub fn bundle(&self, prefix: &'static str) -> Result<Option<BundleUpload>, ApiError> {
        let got: Vec<Option<&Bytes>> = PARTS.iter().map(|p| self.parts.get(&format!("{prefix}_{p}"))).collect();
        if got.iter().all(Option::is_none) {
            return Ok(None);
        }
        let take = |i: usize| {
            got[i].cloned().ok_or_else(|| {
                let field = format!("{prefix}_{}", PARTS[i]);
                ApiError::bad_request("missing_field", Some(&field), format!("missing multipart field '{field}'"))
            })
        };
        Ok(Some(BundleUpload { prefix, image: take(0)?, landmarks: take(1)?, parsing: take(2)? }))
    }

    pub fn require_bundle(&self, prefix: &'static str) -> Result<BundleUpload, ApiError> {
        self.bundle(prefix)?.ok_or_else(|| {
            ApiError::bad_request("missing_field", Some(prefix), format!("missing bundle '{prefix}' ({prefix}_image, {prefix}_landmarks, {prefix}_parsing)"))
        })
    }

    /// The `params` part parsed as JSON; `{}` when absent.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T, ApiError> {
        let raw = self.parts.get("params").map(|b| b.as_ref()).unwrap_or(b"{}");
        serde_json::from_slice(raw).map_err(|e| ApiError::bad_request("invalid_params", Some("params"), e.to_string()))
    }
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    if e.status() == axum::http::StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::too_large(e.body_text())
    } else {
        ApiError::bad_request("invalid_multipart", None, e.body_text())
    }
}
