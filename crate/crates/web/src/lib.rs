//! Browser bindings for the demo page in `www/`.
//!
//! Three views: a wind/desired mixture and its spectrogram, power-law
//! compression of that spectrogram, and the sub-band restacking that feeds
//! the two encoders, together with the wind leakage score.

pub mod scene;

use wasm_bindgen::prelude::*;

use scene::Source;

fn js(e: windnet::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn source(s: &str) -> Result<Source, JsError> {
    Source::parse(s).map_err(js)
}

#[wasm_bindgen]
pub struct Scene(scene::Scene);

#[wasm_bindgen]
impl Scene {
    /// Synthesizes `seconds` of desired signal and wind and mixes them at `snr_db`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, seconds: f64, gust_depth: f64, snr_db: f64) -> Result<Scene, JsError> {
        scene::Scene::new(seed as u64, seconds, gust_depth, snr_db).map(Scene).map_err(js)
    }

    pub fn frames(&self) -> usize {
        self.0.frames()
    }

    pub fn bins(&self) -> usize {
        self.0.bins()
    }

    pub fn mixture(&self) -> Vec<f32> {
        self.0.mixture().iter().map(|&v| v as f32).collect()
    }

    /// `source` is one of `mixture`, `desired`, `wind`.
    pub fn spectrogram_db(&self, source_name: &str) -> Result<Vec<f32>, JsError> {
        Ok(self.0.spectrogram_db(source(source_name)?))
    }

    pub fn compressed_magnitude(&self, source_name: &str, alpha: f64) -> Result<Vec<f32>, JsError> {
        self.0.compressed_magnitude(source(source_name)?, alpha).map_err(js)
    }

    pub fn round_trip_error(&self, alpha: f64) -> Result<f64, JsError> {
        self.0.round_trip_error(alpha).map_err(js)
    }

    pub fn subbands(&self, source_name: &str, frame: usize, alpha: f64) -> Result<Vec<f32>, JsError> {
        self.0.subbands(source(source_name)?, frame, alpha).map_err(js)
    }

    pub fn band_len(&self) -> usize {
        self.0.band_len()
    }

    pub fn n_bands(&self) -> usize {
        self.0.n_bands()
    }

    pub fn band_starts(&self) -> Vec<u32> {
        self.0.band_starts().into_iter().map(|v| v as u32).collect()
    }

    pub fn leakage(&self, source_name: &str) -> Result<f64, JsError> {
        self.0.leakage(source(source_name)?).map_err(js)
    }
}
