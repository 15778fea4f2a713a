//! Model persistence.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "SSRM" | version u16 | mode u8 (0 linear, 1 kernel) | reserved u8
//! config_len u32 | config echo (UTF-8, config-file text)
//! mode 0: norm_bound f64 | atoms | classifier | codes | labels_pred
//! mode 1: sigma f64 (NaN = none) | coeffs | classifier | codes
//!         | labels_pred | gram
//! x_train matrix (training columns after any fit-time normalization;
//!                 0 x 0 when the model was fit on a precomputed kernel)
//! ```
//!
//! where a matrix is `rows u32 | cols u32 | rows*cols f64` in column-major
//! order. Floats are stored bit-exactly, so save followed by load
//! reproduces every matrix bitwise.

use std::path::Path;

use nalgebra::DMatrix;
use ssrgr::kernel::KernelGram;
use ssrgr::kssrgr::KernelModel;
use ssrgr::solvers::Dictionary;
use ssrgr::ssrgr::SsrgrModel;
use ssrgr::Error;

use crate::CliError;

const MAGIC: &[u8; 4] = b"SSRM";
const VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub enum ModelPayload {
    Linear(SsrgrModel),
    Kernel {
        model: KernelModel,
        resolved_sigma: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct SavedModel {
    pub payload: ModelPayload,
    pub x_train: DMatrix<f64>,
    pub config_echo: String,
}

impl SavedModel {
    pub fn labels_pred(&self) -> &DMatrix<f64> {
        match &self.payload {
            ModelPayload::Linear(m) => &m.labels_pred,
            ModelPayload::Kernel { model, .. } => &model.labels_pred,
        }
    }
}

fn push_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    buf.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_model(saved: &SavedModel, path: &Path) -> Result<(), CliError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(match &saved.payload {
        ModelPayload::Linear(_) => 0,
        ModelPayload::Kernel { .. } => 1,
    });
    buf.push(0);
    let echo = saved.config_echo.as_bytes();
    buf.extend_from_slice(&(echo.len() as u32).to_le_bytes());
    buf.extend_from_slice(echo);
    match &saved.payload {
        ModelPayload::Linear(m) => {
            buf.extend_from_slice(&m.dictionary.norm_bound.to_le_bytes());
            push_matrix(&mut buf, &m.dictionary.atoms);
            push_matrix(&mut buf, &m.classifier);
            push_matrix(&mut buf, &m.codes);
            push_matrix(&mut buf, &m.labels_pred);
        }
        ModelPayload::Kernel {
            model,
            resolved_sigma,
        } => {
            buf.extend_from_slice(&resolved_sigma.unwrap_or(f64::NAN).to_le_bytes());
            push_matrix(&mut buf, &model.coeffs);
            push_matrix(&mut buf, &model.classifier);
            push_matrix(&mut buf, &model.codes);
            push_matrix(&mut buf, &model.labels_pred);
            push_matrix(&mut buf, model.gram.values());
        }
    }
    push_matrix(&mut buf, &saved.x_train);
    crate::write_atomic(path, &buf)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, msg: &str) -> CliError {
        CliError::Lib(Error::Parse {
            path: self.path.display().to_string(),
            line: 0,
            msg: format!("model file: {msg}"),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.data.len() {
            return Err(self.corrupt("truncated"));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>, CliError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| self.corrupt("matrix dimensions overflow"))?;
        let bytes = self.take(count * 8)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        Ok(DMatrix::from_iterator(rows, cols, values))
    }
}

pub fn load_model(path: &Path) -> Result<SavedModel, CliError> {
    let data = std::fs::read(path).map_err(Error::from)?;
    let mut r = Reader {
        data: &data,
        pos: 0,
        path,
    };
    if r.take(4)? != MAGIC {
        return Err(r.corrupt("bad magic, not a model file"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(r.corrupt(&format!("unsupported version {version}")));
    }
    let mode = r.take(2)?[0];
    let echo_len = r.u32()? as usize;
    let echo_bytes = r.take(echo_len)?.to_vec();
    let config_echo = String::from_utf8(echo_bytes)
        .map_err(|_| r.corrupt("config echo is not UTF-8"))?;

    let payload = match mode {
        0 => {
            let norm_bound = r.f64()?;
            let atoms = r.matrix()?;
            let classifier = r.matrix()?;
            let codes = r.matrix()?;
            let labels_pred = r.matrix()?;
            ModelPayload::Linear(SsrgrModel {
                dictionary: Dictionary { atoms, norm_bound },
                codes,
                classifier,
                labels_pred,
            })
        }
        1 => {
            let sigma = r.f64()?;
            let coeffs = r.matrix()?;
            let classifier = r.matrix()?;
            let codes = r.matrix()?;
            let labels_pred = r.matrix()?;
            let gram = KernelGram::from_matrix(r.matrix()?)?;
            ModelPayload::Kernel {
                model: KernelModel {
                    coeffs,
                    codes,
                    classifier,
                    labels_pred,
                    gram,
                },
                resolved_sigma: if sigma.is_nan() { None } else { Some(sigma) },
            }
        }
        other => return Err(r.corrupt(&format!("unknown mode byte {other}"))),
    };
    let x_train = r.matrix()?;
    if r.pos != r.data.len() {
        return Err(r.corrupt("trailing bytes"));
    }
    Ok(SavedModel {
        payload,
        x_train,
        config_echo,
    })
}
