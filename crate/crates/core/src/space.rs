//! Mixed categorical / integer / continuous search spaces and the two mask
//! model families defined over them.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{ChunkLevel, Type1Params, ROUND_RANGE, SCALE_RANGE};
use crate::stroke::{Type2Params, KERNEL_SIZES, THRES_RANGE, TIMES_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// Finite unordered set of labels.
    Categorical { values: Vec<i64> },
    /// Inclusive integer range.
    Integer { low: i64, high: i64 },
    /// Closed real interval.
    Continuous { low: f64, high: f64 },
}

impl Domain {
    /// Width of this dimension in encoded space.
    pub fn encoded_len(&self) -> usize {
        match self {
            Domain::Categorical { values } => values.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
}

impl Dimension {
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        Self {
            name: name.into(),
            domain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(i) => i as f64,
            ParamValue::Real(r) => r,
        }
    }

    pub fn as_i64(self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(i),
            ParamValue::Real(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
        }
    }
}

/// One value per dimension, in the space's dimension order.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<ParamValue>);

impl Point {
    pub fn values(&self) -> &[ParamValue] {
        &self.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dimensions: Vec<Dimension>,
}

impl ParamSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self> {
        for d in &dimensions {
            let ok = match &d.domain {
                Domain::Categorical { values } => !values.is_empty(),
                Domain::Integer { low, high } => low <= high,
                Domain::Continuous { low, high } => low.is_finite() && high.is_finite() && low <= high,
            };
            if !ok {
                return Err(Error::invalid(format!("empty domain for `{}`", d.name)));
            }
        }
        Ok(Self { dimensions })
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn encoded_len(&self) -> usize {
        self.dimensions.iter().map(|d| d.domain.encoded_len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.dimensions.iter().map(|d| d.name.as_str()).collect()
    }

    /// Checks that `value` belongs to dimension `i`.
    pub fn check_value(&self, i: usize, value: ParamValue) -> Result<()> {
        let dim = &self.dimensions[i];
        let ok = match (&dim.domain, value) {
            (Domain::Categorical { values }, ParamValue::Int(v)) => values.contains(&v),
            (Domain::Integer { low, high }, ParamValue::Int(v)) => (*low..=*high).contains(&v),
            (Domain::Continuous { low, high }, ParamValue::Real(v)) => (*low..=*high).contains(&v),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("{} = {value}", dim.name)))
        }
    }

    pub fn contains(&self, point: &Point) -> bool {
        self.check(point).is_ok()
    }

    pub fn check(&self, point: &Point) -> Result<()> {
        if point.0.len() != self.len() {
            return Err(Error::OutOfDomain(format!(
                "point has {} values, space has {} dimensions",
                point.0.len(),
                self.len()
            )));
        }
        for (i, &v) in point.0.iter().enumerate() {
            self.check_value(i, v)?;
        }
        Ok(())
    }

    /// One-hot categoricals, min-max scaled numeric dimensions.
    pub fn encode(&self, point: &Point) -> Result<Vec<f64>> {
        self.check(point)?;
        let mut out = Vec::with_capacity(self.encoded_len());
        for (dim, v) in self.dimensions.iter().zip(&point.0) {
            match &dim.domain {
                Domain::Categorical { values } => {
                    let hot = v.as_i64().expect("checked");
                    out.extend(values.iter().map(|&c| if c == hot { 1.0 } else { 0.0 }));
                }
                Domain::Integer { low, high } => {
                    out.push(unit_scale(v.as_f64(), *low as f64, *high as f64));
                }
                Domain::Continuous { low, high } => out.push(unit_scale(v.as_f64(), *low, *high)),
            }
        }
        Ok(out)
    }

    /// Inverse of [`encode`](Self::encode); categoricals take the largest
    /// coordinate, integers round to the nearest in-range value.
    pub fn decode(&self, encoded: &[f64]) -> Result<Point> {
        if encoded.len() != self.encoded_len() {
            return Err(Error::invalid(format!(
                "encoded vector has {} entries, expected {}",
                encoded.len(),
                self.encoded_len()
            )));
        }
        let mut values = Vec::with_capacity(self.len());
        let mut at = 0;
        for dim in &self.dimensions {
            let n = dim.domain.encoded_len();
            let block = &encoded[at..at + n];
            at += n;
            values.push(match &dim.domain {
                Domain::Categorical { values } => {
                    let mut best = 0;
                    for (i, &x) in block.iter().enumerate() {
                        if x > block[best] {
                            best = i;
                        }
                    }
                    ParamValue::Int(values[best])
                }
                Domain::Integer { low, high } => ParamValue::Int(unit_to_int(block[0], *low, *high)),
                Domain::Continuous { low, high } => ParamValue::Real(unit_to_real(block[0], *low, *high)),
            });
        }
        Ok(Point(values))
    }

    /// Relaxed coordinates hold a category index for categorical
    /// dimensions and a unit-interval position for numeric ones.
    pub(crate) fn encode_relaxed(&self, relaxed: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (dim, &r) in self.dimensions.iter().zip(relaxed) {
            match &dim.domain {
                Domain::Categorical { values } => {
                    let hot = r as usize;
                    out.extend((0..values.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
                _ => out.push(r.clamp(0.0, 1.0)),
            }
        }
    }

    pub(crate) fn decode_relaxed(&self, relaxed: &[f64]) -> Point {
        Point(
            self.dimensions
                .iter()
                .zip(relaxed)
                .map(|(dim, &r)| match &dim.domain {
                    Domain::Categorical { values } => ParamValue::Int(values[r as usize]),
                    Domain::Integer { low, high } => ParamValue::Int(unit_to_int(r, *low, *high)),
                    Domain::Continuous { low, high } => ParamValue::Real(unit_to_real(r, *low, *high)),
                })
                .collect(),
        )
    }

    /// Ordered JSON object `{name: value}`.
    pub fn point_to_json(&self, point: &Point) -> Value {
        let mut map = Map::new();
        for (dim, v) in self.dimensions.iter().zip(&point.0) {
            let json = match *v {
                ParamValue::Int(i) => Value::from(i),
                ParamValue::Real(r) => Value::from(r),
            };
            map.insert(dim.name.clone(), json);
        }
        Value::Object(map)
    }

    pub fn point_from_json(&self, value: &Value) -> Result<Point> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::invalid("point must be a JSON object"))?;
        let mut values = Vec::with_capacity(self.len());
        for dim in &self.dimensions {
            let v = obj
                .get(&dim.name)
                .ok_or_else(|| Error::invalid(format!("point is missing `{}`", dim.name)))?;
            values.push(match dim.domain {
                Domain::Continuous { .. } => ParamValue::Real(
                    v.as_f64()
                        .ok_or_else(|| Error::invalid(format!("`{}` must be a number", dim.name)))?,
                ),
                _ => ParamValue::Int(
                    v.as_i64()
                        .ok_or_else(|| Error::invalid(format!("`{}` must be an integer", dim.name)))?,
                ),
            });
        }
        if obj.len() != self.len() {
            return Err(Error::invalid(format!(
                "point has unknown keys; expected {:?}",
                self.names()
            )));
        }
        let p = Point(values);
        self.check(&p)?;
        Ok(p)
    }

    /// Parses `name=value,name=value` in any order.
    pub fn parse_assignment(&self, text: &str) -> Result<Point> {
        let mut obj = Map::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected name=value, got `{part}`")))?;
            let num: Value = serde_json::from_str(v.trim())
                .map_err(|_| Error::invalid(format!("`{v}` is not a number")))?;
            obj.insert(k.trim().to_string(), num);
        }
        self.point_from_json(&Value::Object(obj))
    }

    /// Full Cartesian product of per-dimension value lists, first dimension
    /// outermost.
    pub fn cartesian(&self, axes: &[Vec<ParamValue>]) -> Result<Vec<Point>> {
        if axes.len() != self.len() {
            return Err(Error::invalid("one axis per dimension required"));
        }
        let mut points = vec![Vec::new()];
        for axis in axes {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for prefix in &points {
                for &v in axis {
                    let mut p = prefix.clone();
                    p.push(v);
                    next.push(p);
                }
            }
            points = next;
        }
        let points: Vec<Point> = points.into_iter().map(Point).collect();
        for p in &points {
            self.check(p)?;
        }
        Ok(points)
    }
}

fn unit_scale(v: f64, low: f64, high: f64) -> f64 {
    if high > low {
        (v - low) / (high - low)
    } else {
        0.0
    }
}

fn unit_to_real(z: f64, low: f64, high: f64) -> f64 {
    (low + z.clamp(0.0, 1.0) * (high - low)).clamp(low, high)
}

fn unit_to_int(z: f64, low: i64, high: i64) -> i64 {
    let v = low as f64 + z.clamp(0.0, 1.0) * (high - low) as f64;
    (v.round() as i64).clamp(low, high)
}

/// The two mask profile families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskModel {
    /// Superellipses over OCR boxes.
    Type1,
    /// Thresholded stroke map plus morphology.
    Type2,
}

impl std::str::FromStr for MaskModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" | "1" => Ok(MaskModel::Type1),
            "type2" | "2" => Ok(MaskModel::Type2),
            other => Err(Error::invalid(format!("unknown mask model `{other}` (type1|type2)"))),
        }
    }
}

impl fmt::Display for MaskModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskModel::Type1 => "type1",
            MaskModel::Type2 => "type2",
        })
    }
}

impl MaskModel {
    pub fn space(self) -> ParamSpace {
        let dims = match self {
            MaskModel::Type1 => vec![
                Dimension::new(
                    "s_chunk",
                    Domain::Categorical {
                        values: ChunkLevel::ALL.iter().map(|c| c.index()).collect(),
                    },
                ),
                Dimension::new(
                    "s_scale",
                    Domain::Continuous {
                        low: SCALE_RANGE.0,
                        high: SCALE_RANGE.1,
                    },
                ),
                Dimension::new(
                    "s_round",
                    Domain::Continuous {
                        low: ROUND_RANGE.0,
                        high: ROUND_RANGE.1,
                    },
                ),
            ],
            MaskModel::Type2 => vec![
                Dimension::new(
                    "t_thres",
                    Domain::Integer {
                        low: THRES_RANGE.0,
                        high: THRES_RANGE.1,
                    },
                ),
                Dimension::new(
                    "t_times",
                    Domain::Integer {
                        low: TIMES_RANGE.0,
                        high: TIMES_RANGE.1,
                    },
                ),
                Dimension::new(
                    "t_kernel",
                    Domain::Categorical {
                        values: KERNEL_SIZES.to_vec(),
                    },
                ),
            ],
        };
        ParamSpace::new(dims).expect("static spaces are valid")
    }

    /// Initial design grid (27 Type-1 points, 30 Type-2 points).
    pub fn grid(self) -> Vec<Point> {
        use ParamValue::{Int, Real};
        let axes = match self {
            MaskModel::Type1 => vec![
                vec![Int(0), Int(1), Int(2)],
                vec![Real(1.0), Real(1.25), Real(1.5)],
                vec![Real(0.0), Real(0.5), Real(1.0)],
            ],
            MaskModel::Type2 => vec![
                vec![Int(15), Int(25), Int(35), Int(45), Int(55)],
                vec![Int(-3), Int(0), Int(3)],
                vec![Int(1), Int(7)],
            ],
        };
        self.space().cartesian(&axes).expect("grid lies in the space")
    }

    pub fn type1_params(self, point: &Point) -> Result<Type1Params> {
        if self != MaskModel::Type1 {
            return Err(Error::invalid("not a type1 point"));
        }
        self.space().check(point)?;
        let chunk = ChunkLevel::from_index(point.0[0].as_i64().expect("categorical")).expect("checked");
        Type1Params::new(chunk, point.0[1].as_f64(), point.0[2].as_f64())
    }

    pub fn type2_params(self, point: &Point) -> Result<Type2Params> {
        if self != MaskModel::Type2 {
            return Err(Error::invalid("not a type2 point"));
        }
        self.space().check(point)?;
        let int = |i: usize| point.0[i].as_i64().expect("integer");
        Type2Params::new(int(0), int(1), int(2))
    }
}

/// Grid of initial points for a model family.
pub fn grid_init(model: MaskModel) -> Vec<Point> {
    model.grid()
}
