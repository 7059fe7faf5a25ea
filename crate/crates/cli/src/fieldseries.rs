//! The `EKPF` field-series file: named time series of grid fields.
//!
//! All integers are `u32` and all reals `f64`, little-endian:
//!
//! ```text
//! "EKPF" version dim n period field_count
//! field_count × { name_len name time_count values }
//! ```
//!
//! A field holds `time_count` frames of `n^dim` values, frame-major. The
//! reserved field `t` holds the sample times, one value per frame. Vector
//! fields are stored by component as `name.0`, `name.1`, ...

use std::path::Path;

use ekp_core::{Grid64, ScalarField64, VectorField64};

pub const MAGIC: &[u8; 4] = b"EKPF";
pub const VERSION: u32 = 0;
pub const TIME_FIELD: &str = "t";

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("{0}")]
    Content(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesField {
    pub name: String,
    pub frames: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSeries {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    pub fields: Vec<SeriesField>,
}

impl FieldSeries {
    pub fn new(grid: &Grid64) -> Self {
        Self {
            dim: grid.dim(),
            n: grid.n(),
            period: grid.period(),
            fields: Vec::new(),
        }
    }

    pub fn grid(&self) -> Result<Grid64, SeriesError> {
        Grid64::new(self.dim, self.n, self.period).map_err(|e| SeriesError::Content(e.to_string()))
    }

    fn points_for(&self, name: &str) -> usize {
        if name == TIME_FIELD {
            1
        } else {
            self.n.pow(self.dim as u32)
        }
    }

    pub fn push(&mut self, name: &str, frames: Vec<Vec<f64>>) -> Result<(), SeriesError> {
        let points = self.points_for(name);
        if let Some(bad) = frames.iter().find(|f| f.len() != points) {
            return Err(SeriesError::Content(format!(
                "field `{name}` frame has {} values, expected {points}",
                bad.len()
            )));
        }
        if self.field(name).is_some() {
            return Err(SeriesError::Content(format!("duplicate field `{name}`")));
        }
        self.fields.push(SeriesField {
            name: name.to_string(),
            frames,
        });
        Ok(())
    }

    pub fn push_times(&mut self, times: &[f64]) -> Result<(), SeriesError> {
        self.push(TIME_FIELD, times.iter().map(|&t| vec![t]).collect())
    }

    pub fn push_scalars(&mut self, name: &str, series: &[ScalarField64]) -> Result<(), SeriesError> {
        self.push(name, series.iter().map(|f| f.values().to_vec()).collect())
    }

    pub fn push_vectors(&mut self, name: &str, series: &[VectorField64]) -> Result<(), SeriesError> {
        let d = series.first().map_or(self.dim, VectorField64::dim);
        for a in 0..d {
            let frames = series.iter().map(|v| v.component(a).to_vec()).collect();
            self.push(&format!("{name}.{a}"), frames)?;
        }
        Ok(())
    }

    pub fn field(&self, name: &str) -> Option<&SeriesField> {
        self.fields.iter().find(|f| f.name == name)
    }

    fn require(&self, name: &str) -> Result<&SeriesField, SeriesError> {
        self.field(name)
            .ok_or_else(|| SeriesError::Content(format!("series has no field `{name}`")))
    }

    pub fn times(&self) -> Result<Vec<f64>, SeriesError> {
        Ok(self.require(TIME_FIELD)?.frames.iter().map(|f| f[0]).collect())
    }

    pub fn scalars(&self, name: &str) -> Result<Vec<ScalarField64>, SeriesError> {
        let grid = self.grid()?;
        self.require(name)?
            .frames
            .iter()
            .map(|f| ScalarField64::new(&grid, f.clone()).map_err(|e| SeriesError::Content(format!("`{name}`: {e}"))))
            .collect()
    }

    pub fn vectors(&self, name: &str) -> Result<Vec<VectorField64>, SeriesError> {
        let grid = self.grid()?;
        let comps: Vec<&SeriesField> = (0..self.dim)
            .map(|a| self.require(&format!("{name}.{a}")))
            .collect::<Result<_, _>>()?;
        let frames = comps[0].frames.len();
        if comps.iter().any(|c| c.frames.len() != frames) {
            return Err(SeriesError::Content(format!("components of `{name}` have different lengths")));
        }
        (0..frames)
            .map(|k| {
                VectorField64::new(&grid, comps.iter().map(|c| c.frames[k].clone()).collect())
                    .map_err(|e| SeriesError::Content(format!("`{name}`: {e}")))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&self.period.to_le_bytes());
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for f in &self.fields {
            out.extend_from_slice(&(f.name.len() as u32).to_le_bytes());
            out.extend_from_slice(f.name.as_bytes());
            out.extend_from_slice(&(f.frames.len() as u32).to_le_bytes());
            for frame in &f.frames {
                for v in frame {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SeriesError> {
        let mut r = Reader { bytes, offset: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(SeriesError::Format {
                offset: 0,
                message: format!("bad magic {magic:?}"),
            });
        }
        let at = r.offset;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(SeriesError::Format {
                offset: at,
                message: format!("unsupported version {version}"),
            });
        }
        let dim = r.u32("dim")? as usize;
        let n = r.u32("n")? as usize;
        let period = r.f64("period")?;
        let count = r.u32("field count")?;
        let mut series = FieldSeries {
            dim,
            n,
            period,
            fields: Vec::new(),
        };
        for _ in 0..count {
            let len = r.u32("name length")? as usize;
            let at = r.offset;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| SeriesError::Format {
                    offset: at,
                    message: "field name is not UTF-8".into(),
                })?
                .to_string();
            let times = r.u32("time count")? as usize;
            let points = series.points_for(&name);
            let mut frames = Vec::with_capacity(times);
            for _ in 0..times {
                let raw = r.take(points * 8, "values")?;
                frames.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
            }
            if series.field(&name).is_some() {
                return Err(SeriesError::Format {
                    offset: at,
                    message: format!("duplicate field `{name}`"),
                });
            }
            series.fields.push(SeriesField { name, frames });
        }
        if r.offset != bytes.len() {
            return Err(SeriesError::Format {
                offset: r.offset,
                message: format!("{} trailing bytes", bytes.len() - r.offset),
            });
        }
        Ok(series)
    }

    pub fn write(&self, path: &Path) -> Result<(), SeriesError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, SeriesError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8], SeriesError> {
        let end = self.offset.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(SeriesError::Format {
                offset: self.offset,
                message: format!(
                    "truncated {what}: need {len} bytes, {} left",
                    self.bytes.len() - self.offset
                ),
            });
        };
        let out = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, SeriesError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, SeriesError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}
