//! Run manifests: every knob that affects an output, plus counters and
//! timings, recorded as JSON next to the result.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct GridInfo {
    pub points: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub uniform: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// relative quantization of cached weight-table keys
    pub weight_cache_rel: f64,
    /// adaptive quadrature tolerance for semi-explicit Gamma weights
    pub gamma_kernel_quadrature: f64,
    /// contour quadrature error scale `2.85^{-mquad}`
    pub contour_error_scale: f64,
}

impl Tolerances {
    pub fn with_mquad(mquad: usize) -> Self {
        Tolerances {
            weight_cache_rel: (2.0f64).powi(-44),
            gamma_kernel_quadrature: 1e-11,
            contour_error_scale: 2.85f64.powi(-(mquad as i32)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_file_w: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readouts: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mquad: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dyadic: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_gram: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine_factor: Option<usize>,
    pub binary_output: bool,
    pub deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub tolerances: Tolerances,
    pub op_count: u64,
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
    pub wall_time_ms: f64,
    pub output_file: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: format!("vsig {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            path_file: None,
            path_file_w: None,
            kernel_file: None,
            kernel_sha256: None,
            grid: None,
            trunc: None,
            exponents: None,
            nodes: None,
            readouts: None,
            mquad: None,
            scheme: None,
            dyadic: None,
            static_gram: None,
            seed: None,
            count: None,
            segments: None,
            fine_factor: None,
            binary_output: false,
            deterministic: std::env::var("VSIG_DETERMINISTIC").as_deref() == Ok("1"),
            jobs: None,
            tolerances: Tolerances::with_mquad(vsig_core::fssk::DEFAULT_MQUAD),
            op_count: 0,
            extra: serde_json::Map::new(),
            wall_time_ms: 0.0,
            output_file: String::new(),
        }
    }

    pub fn grid_of(path: &vsig_core::paths::Path) -> GridInfo {
        GridInfo {
            points: path.times.len(),
            t_start: path.times[0],
            t_end: *path.times.last().unwrap(),
            uniform: path.uniform_step().is_ok(),
        }
    }

    pub fn write(&self, file: &std::path::Path) -> anyhow::Result<()> {
        std::fs::write(file, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
