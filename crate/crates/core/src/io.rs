//! Model files (JSON) and correspondence files (JSON lines).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, ParseErrorKind, Result};
use crate::geometry::{rotation_error, CameraModel, Correspondence, DistortionOrder};
use crate::noise::LidarScales;

/// Largest `‖RᵀR − I‖` accepted when reading a model.
pub const FILE_ROTATION_TOLERANCE: f64 = 1e-6;

/// JSON formatter that writes every float with 17 significant digits.
#[derive(Default)]
pub struct Precise(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_precise_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise::default());
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Serialize)]
struct ModelFile<'a> {
    f_x: f64,
    f_y: f64,
    c_x: f64,
    c_y: f64,
    theta: &'a [f64; 3],
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
    distortion_order: u8,
}

pub fn model_to_json(model: &CameraModel) -> String {
    let r = model.rotation;
    let file = ModelFile {
        f_x: model.fx,
        f_y: model.fy,
        c_x: model.cx,
        c_y: model.cy,
        theta: &model.theta,
        r: std::array::from_fn(|i| r[(i / 3, i % 3)]),
        t: [model.translation.x, model.translation.y, model.translation.z],
        distortion_order: model.order.into(),
    };
    to_precise_json(&file) + "\n"
}

pub fn save_model(model: &CameraModel, path: &Path) -> Result<()> {
    write_file(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<CameraModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text).map_err(|e| with_path(e, path))
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    line: usize,
}

impl Fields<'_> {
    fn err(&self, field: &str, kind: ParseErrorKind, detail: impl Into<String>) -> Error {
        Error::Parse {
            path: None,
            line: self.line,
            field: field.to_owned(),
            kind,
            detail: detail.into(),
        }
    }

    fn get(&self, field: &str) -> Result<&Value> {
        self.obj
            .get(field)
            .ok_or_else(|| self.err(field, ParseErrorKind::MissingField, ""))
    }

    fn number(&self, field: &str, v: &Value) -> Result<f64> {
        let x = v.as_f64().ok_or_else(|| {
            self.err(
                field,
                ParseErrorKind::InvalidValue,
                format!("expected a number, got {v}"),
            )
        })?;
        if !x.is_finite() {
            return Err(self.err(field, ParseErrorKind::NotFinite, ""));
        }
        Ok(x)
    }

    fn f64(&self, field: &str) -> Result<f64> {
        self.number(field, self.get(field)?)
    }

    fn opt_f64(&self, field: &str) -> Result<Option<f64>> {
        match self.obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => self.number(field, v).map(Some),
        }
    }

    fn array<const N: usize>(&self, field: &str) -> Result<[f64; N]> {
        let v = self.get(field)?;
        let arr = v
            .as_array()
            .ok_or_else(|| self.err(field, ParseErrorKind::InvalidValue, "expected an array"))?;
        if arr.len() != N {
            return Err(self.err(
                field,
                ParseErrorKind::InvalidValue,
                format!("expected {N} numbers, got {}", arr.len()),
            ));
        }
        let mut out = [0.0; N];
        for (o, x) in out.iter_mut().zip(arr) {
            *o = self.number(field, x)?;
        }
        Ok(out)
    }
}

fn parse_object(text: &str, line: usize) -> Result<Map<String, Value>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: None,
        line: if line == 0 { e.line() } else { line },
        field: String::new(),
        kind: ParseErrorKind::Syntax,
        detail: e.to_string(),
    })?;
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Parse {
            path: None,
            line: line.max(1),
            field: String::new(),
            kind: ParseErrorKind::Syntax,
            detail: "expected a JSON object".into(),
        }),
    }
}

pub fn model_from_json(text: &str) -> Result<CameraModel> {
    let obj = parse_object(text, 0)?;
    let f = Fields { obj: &obj, line: 1 };
    let order = match f.get("distortion_order")?.as_u64() {
        Some(1) => DistortionOrder::One,
        Some(3) => DistortionOrder::Three,
        _ => {
            return Err(f.err("distortion_order", ParseErrorKind::InvalidValue, "expected 1 or 3"));
        }
    };
    let theta = f.array::<3>("theta")?;
    if order == DistortionOrder::One && (theta[1] != 0.0 || theta[2] != 0.0) {
        return Err(f.err(
            "theta",
            ParseErrorKind::DistortionOrderMismatch,
            "order 1 with non-zero theta[1] or theta[2]",
        ));
    }
    let rotation = Matrix3::from_row_slice(&f.array::<9>("R")?);
    let rerr = rotation_error(&rotation);
    if rerr > FILE_ROTATION_TOLERANCE {
        return Err(f.err(
            "R",
            ParseErrorKind::InvalidRotation,
            format!("|RᵀR − I| + |det R − 1| = {rerr:e}"),
        ));
    }
    let (fx, fy) = (f.f64("f_x")?, f.f64("f_y")?);
    if fx <= 0.0 || fy <= 0.0 {
        return Err(f.err("f_x", ParseErrorKind::InvalidValue, "focal lengths must be positive"));
    }
    Ok(CameraModel {
        fx,
        fy,
        cx: f.f64("c_x")?,
        cy: f.f64("c_y")?,
        theta,
        rotation,
        translation: Vector3::from(f.array::<3>("t")?),
        order,
    })
}

/// A correspondence with optional known noise scales, as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrespondenceRecord {
    pub corr: Correspondence,
    pub scales: Option<LidarScales>,
}

pub fn correspondence_line(rec: &CorrespondenceRecord) -> String {
    let c = &rec.corr;
    let mut obj = Map::new();
    obj.insert("x2d".into(), serde_json::json!([c.x2d.x, c.x2d.y]));
    obj.insert("X3d".into(), serde_json::json!([c.x3d.x, c.x3d.y, c.x3d.z]));
    obj.insert("inlier".into(), Value::Bool(c.inlier));
    if let Some(s) = rec.scales {
        obj.insert("a_x".into(), serde_json::json!(s.a_x));
        obj.insert("a_y".into(), serde_json::json!(s.a_y));
    }
    serde_json::to_string(&Value::Object(obj)).expect("serializing to memory cannot fail")
}

pub fn correspondences_to_jsonl(records: &[CorrespondenceRecord]) -> String {
    records.iter().map(|r| correspondence_line(r) + "\n").collect()
}

/// Parses JSON lines; blank lines are skipped. Either every record carries
/// `a_x`/`a_y` or none does.
pub fn correspondences_from_jsonl(text: &str) -> Result<Vec<CorrespondenceRecord>> {
    let mut out = Vec::new();
    let mut with_scales: Option<bool> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let obj = parse_object(raw, line)?;
        let f = Fields { obj: &obj, line };
        let x2d = Vector2::from(f.array::<2>("x2d")?);
        let x3d = Vector3::from(f.array::<3>("X3d")?);
        let inlier = f
            .get("inlier")?
            .as_bool()
            .ok_or_else(|| f.err("inlier", ParseErrorKind::InvalidValue, "expected a boolean"))?;
        let scales = match (f.opt_f64("a_x")?, f.opt_f64("a_y")?) {
            (Some(a_x), Some(a_y)) => {
                let s = LidarScales::new(a_x, a_y);
                if !s.is_valid() {
                    return Err(f.err("a_x", ParseErrorKind::InvalidValue, "scales must be non-negative"));
                }
                Some(s)
            }
            (None, None) => None,
            (Some(_), None) => return Err(f.err("a_y", ParseErrorKind::MissingField, "a_x given without a_y")),
            (None, Some(_)) => return Err(f.err("a_x", ParseErrorKind::MissingField, "a_y given without a_x")),
        };
        match with_scales {
            None => with_scales = Some(scales.is_some()),
            Some(w) if w != scales.is_some() => {
                return Err(f.err("a_x", ParseErrorKind::MissingField, "scales present on some lines only"));
            }
            _ => {}
        }
        out.push(CorrespondenceRecord {
            corr: Correspondence { x2d, x3d, inlier },
            scales,
        });
    }
    Ok(out)
}

pub fn load_correspondences(path: &Path) -> Result<Vec<CorrespondenceRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    correspondences_from_jsonl(&text).map_err(|e| with_path(e, path))
}

pub fn save_correspondences(records: &[CorrespondenceRecord], path: &Path) -> Result<()> {
    write_file(path, correspondences_to_jsonl(records).as_bytes())
}

/// Writes a file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn with_path(e: Error, p: &Path) -> Error {
    match e {
        Error::Parse {
            line,
            field,
            kind,
            detail,
            ..
        } => Error::Parse {
            path: Some(p.to_path_buf()),
            line,
            field,
            kind,
            detail,
        },
        other => other,
    }
}
