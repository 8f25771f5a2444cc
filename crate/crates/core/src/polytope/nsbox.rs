use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::qudit::{JointTable, CLAMP_TOL, SUM_TOL};

/// Tolerance at which a box counts as nonsignaling.
pub const CERTIFY_TOL: f64 = 1e-9;

/// Alphabet sizes: `|X| = |Y| = d`, `|Z| = z`, `|A| = |B| = n`, `|C| = c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxShape {
    pub d: usize,
    pub z: usize,
    pub n: usize,
    pub c: usize,
}

impl BoxShape {
    pub fn new(d: usize, z: usize, n: usize, c: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if z == 0 || n == 0 || c == 0 {
            return Err(Error::param("alphabet sizes z, N and C must be at least 1"));
        }
        Ok(BoxShape { d, z, n, c })
    }

    pub fn slice_len(&self) -> usize {
        self.d * self.d * self.z
    }

    pub fn n_slices(&self) -> usize {
        self.n * self.n * self.c
    }

    pub fn len(&self) -> usize {
        self.slice_len() * self.n_slices()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat offset of `P(x, y, zo | a, b, ch)`; settings 1-based, outcomes 0-based.
    pub fn index(&self, a: usize, b: usize, ch: usize, x: usize, y: usize, zo: usize) -> usize {
        let slice = ((a - 1) * self.n + (b - 1)) * self.c + (ch - 1);
        slice * self.slice_len() + (x * self.d + y) * self.z + zo
    }
}

/// A conditional distribution `P(x, y, zo | a, b, ch)`, stored row-major
/// over `(a, b, ch, x, y, zo)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsBox {
    shape: BoxShape,
    table: Vec<f64>,
}

impl NsBox {
    /// Validates every slice: entries nonnegative (up to `CLAMP_TOL`, then
    /// clamped) and sums within `SUM_TOL` of 1.
    pub fn new(shape: BoxShape, mut table: Vec<f64>) -> Result<Self> {
        if table.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: table.len(),
            });
        }
        let sl = shape.slice_len();
        for (k, slice) in table.chunks_mut(sl).enumerate() {
            let what = || {
                let ch = k % shape.c + 1;
                let b = (k / shape.c) % shape.n + 1;
                let a = k / (shape.c * shape.n) + 1;
                format!("slice (A={a}, B={b}, C={ch})")
            };
            for p in slice.iter_mut() {
                if !p.is_finite() || *p < -CLAMP_TOL {
                    return Err(Error::NegativeProbability {
                        what: what(),
                        value: *p,
                    });
                }
                *p = p.max(0.0);
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::NotNormalized { what: what(), sum });
            }
        }
        Ok(NsBox { shape, table })
    }

    pub fn from_fn<F>(shape: BoxShape, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize, usize, usize) -> f64,
    {
        let mut table = vec![0.0; shape.len()];
        for a in 1..=shape.n {
            for b in 1..=shape.n {
                for ch in 1..=shape.c {
                    for x in 0..shape.d {
                        for y in 0..shape.d {
                            for zo in 0..shape.z {
                                table[shape.index(a, b, ch, x, y, zo)] = f(a, b, ch, x, y, zo);
                            }
                        }
                    }
                }
            }
        }
        NsBox::new(shape, table)
    }

    pub fn uniform(shape: BoxShape) -> Self {
        let p = 1.0 / shape.slice_len() as f64;
        NsBox {
            shape,
            table: vec![p; shape.len()],
        }
    }

    /// Embeds a bipartite table with a trivial Charlie (`|Z| = |C| = 1`).
    pub fn from_joint(joint: &JointTable) -> Result<Self> {
        let (d, n) = (joint.dim(), joint.n_settings());
        let shape = BoxShape::new(d, 1, n, 1)?;
        let mut table = vec![0.0; shape.len()];
        for a in 1..=n {
            for b in 1..=n {
                let s = joint.slice(a, b).ok_or(Error::MissingSlice { a, b })?;
                let start = shape.index(a, b, 1, 0, 0, 0);
                table[start..start + d * d].copy_from_slice(s);
            }
        }
        NsBox::new(shape, table)
    }

    pub fn shape(&self) -> BoxShape {
        self.shape
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn p(&self, a: usize, b: usize, ch: usize, x: usize, y: usize, zo: usize) -> f64 {
        self.table[self.shape.index(a, b, ch, x, y, zo)]
    }

    pub fn slice(&self, a: usize, b: usize, ch: usize) -> &[f64] {
        let start = self.shape.index(a, b, ch, 0, 0, 0);
        &self.table[start..start + self.shape.slice_len()]
    }

    /// `P(x, y | a, b, ch)`, indexed `x * d + y`.
    pub fn marginal_xy(&self, a: usize, b: usize, ch: usize) -> Vec<f64> {
        let BoxShape { d, z, .. } = self.shape;
        self.slice(a, b, ch)
            .chunks(z)
            .take(d * d)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// `P(x, zo | a, b, ch)`, indexed `x * z + zo`.
    pub fn marginal_xz(&self, a: usize, b: usize, ch: usize) -> Vec<f64> {
        let BoxShape { d, z, .. } = self.shape;
        let s = self.slice(a, b, ch);
        let mut out = vec![0.0; d * z];
        for x in 0..d {
            for y in 0..d {
                for zo in 0..z {
                    out[x * z + zo] += s[(x * d + y) * z + zo];
                }
            }
        }
        out
    }

    /// `P(y, zo | a, b, ch)`, indexed `y * z + zo`.
    pub fn marginal_yz(&self, a: usize, b: usize, ch: usize) -> Vec<f64> {
        let BoxShape { d, z, .. } = self.shape;
        let s = self.slice(a, b, ch);
        let mut out = vec![0.0; d * z];
        for x in 0..d {
            for y in 0..d {
                for zo in 0..z {
                    out[y * z + zo] += s[(x * d + y) * z + zo];
                }
            }
        }
        out
    }

    /// `P(x, zo | a, ch)` read from the `B = 1` slice.
    pub fn p_xz_given_ac(&self, a: usize, ch: usize) -> Vec<f64> {
        self.marginal_xz(a, 1, ch)
    }

    /// `P(zo | ch)` read from the `A = B = 1` slice.
    pub fn p_z_given_c(&self, ch: usize) -> Vec<f64> {
        let z = self.shape.z;
        let xz = self.marginal_xz(1, 1, ch);
        (0..z).map(|zo| xz.iter().skip(zo).step_by(z).sum()).collect()
    }

    /// `P(x | a)` read from the `B = C = 1` slice.
    pub fn p_x_given_a(&self, a: usize) -> Vec<f64> {
        let z = self.shape.z;
        self.p_xz_given_ac(a, 1)
            .chunks(z)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// `P(y | b)` read from the `A = C = 1` slice.
    pub fn p_y_given_b(&self, b: usize) -> Vec<f64> {
        let z = self.shape.z;
        self.marginal_yz(1, b, 1)
            .chunks(z)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// The Alice-Bob table `P(x, y | a, b)` at `C = 1`.
    pub fn joint_xy(&self) -> Result<JointTable> {
        let n = self.shape.n;
        let mut slices = BTreeMap::new();
        for a in 1..=n {
            for b in 1..=n {
                slices.insert((a, b), self.marginal_xy(a, b, 1));
            }
        }
        JointTable::new(self.shape.d, n, slices)
    }

    /// Convex combination `sum w_k box_k`; all boxes must share one shape.
    pub fn mixture(parts: &[(f64, &NsBox)]) -> Result<Self> {
        let (_, first) = parts.first().ok_or_else(|| Error::param("empty mixture"))?;
        let shape = first.shape;
        let mut table = vec![0.0; shape.len()];
        for (w, b) in parts {
            if b.shape != shape {
                return Err(Error::param("mixture components differ in shape"));
            }
            for (t, p) in table.iter_mut().zip(&b.table) {
                *t += w * p;
            }
        }
        NsBox::new(shape, table)
    }

    /// Nested arrays `table[a][b][ch][x][y][zo]` plus the alphabet sizes.
    pub fn to_json(&self) -> Value {
        let BoxShape { d, z, n, c } = self.shape;
        let nested: Vec<Value> = (1..=n)
            .map(|a| {
                Value::Array(
                    (1..=n)
                        .map(|b| {
                            Value::Array(
                                (1..=c)
                                    .map(|ch| {
                                        Value::Array(
                                            (0..d)
                                                .map(|x| {
                                                    Value::Array(
                                                        (0..d)
                                                            .map(|y| {
                                                                Value::from(
                                                                    (0..z)
                                                                        .map(|zo| self.p(a, b, ch, x, y, zo))
                                                                        .collect::<Vec<_>>(),
                                                                )
                                                            })
                                                            .collect(),
                                                    )
                                                })
                                                .collect(),
                                        )
                                    })
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({ "d": d, "z": z, "n_settings": n, "c": c, "table": nested })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let size = |key: &str| -> Result<usize> {
            v.get(key)
                .and_then(Value::as_u64)
                .map(|u| u as usize)
                .ok_or_else(|| Error::parse(key, "missing or not an unsigned integer"))
        };
        let shape = BoxShape::new(size("d")?, size("z")?, size("n_settings")?, size("c")?)?;
        let mut table = Vec::with_capacity(shape.len());
        let top = v.get("table").ok_or_else(|| Error::parse("table", "missing"))?;
        flatten(top, &[shape.n, shape.n, shape.c, shape.d, shape.d, shape.z], "table", &mut table)?;
        NsBox::new(shape, table)
    }
}

fn flatten(v: &Value, dims: &[usize], path: &str, out: &mut Vec<f64>) -> Result<()> {
    match dims.split_first() {
        None => {
            let p = v
                .as_f64()
                .ok_or_else(|| Error::parse(path, "expected a number"))?;
            out.push(p);
            Ok(())
        }
        Some((&len, rest)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::parse(path, "expected an array"))?;
            if arr.len() != len {
                return Err(Error::parse(path, format!("expected {len} entries, found {}", arr.len())));
            }
            for (i, item) in arr.iter().enumerate() {
                flatten(item, rest, &format!("{path}[{i}]"), out)?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `P(x, y | a, b, ch)` independent of `ch`.
    XyIndependentOfC,
    /// `P(x, zo | a, b, ch)` independent of `b`.
    XzIndependentOfB,
    /// `P(y, zo | a, b, ch)` independent of `a`.
    YzIndependentOfA,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::XyIndependentOfC => "P(XY|ABC) = P(XY|AB)",
            Condition::XzIndependentOfB => "P(XZ|ABC) = P(XZ|AC)",
            Condition::YzIndependentOfA => "P(YZ|ABC) = P(YZ|BC)",
        })
    }
}

/// One failed nonsignaling condition. `settings` holds the fixed `(A, B, C)`
/// values; the setting the marginal should not depend on is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub settings: [Option<usize>; 3],
    /// Largest spread (max - min over the varying setting) of any marginal entry.
    pub magnitude: f64,
}

fn spread(rows: &[Vec<f64>]) -> f64 {
    let len = rows.first().map_or(0, Vec::len);
    (0..len)
        .map(|k| {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[k]), hi.max(r[k])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Every nonsignaling condition that fails by more than `tol`.
pub fn check_nonsignaling(bx: &NsBox, tol: f64) -> Result<Vec<Violation>> {
    let BoxShape { n, c, .. } = bx.shape;
    for a in 1..=n {
        for b in 1..=n {
            for ch in 1..=c {
                let sum: f64 = bx.slice(a, b, ch).iter().sum();
                if (sum - 1.0).abs() > SUM_TOL {
                    return Err(Error::NotNormalized {
                        what: format!("slice (A={a}, B={b}, C={ch})"),
                        sum,
                    });
                }
            }
        }
    }

    let mut out = Vec::new();
    let mut push = |condition, settings, rows: Vec<Vec<f64>>| {
        let magnitude = spread(&rows);
        if magnitude > tol {
            out.push(Violation {
                condition,
                settings,
                magnitude,
            });
        }
    };
    for a in 1..=n {
        for b in 1..=n {
            let rows = (1..=c).map(|ch| bx.marginal_xy(a, b, ch)).collect();
            push(Condition::XyIndependentOfC, [Some(a), Some(b), None], rows);
        }
    }
    for a in 1..=n {
        for ch in 1..=c {
            let rows = (1..=n).map(|b| bx.marginal_xz(a, b, ch)).collect();
            push(Condition::XzIndependentOfB, [Some(a), None, Some(ch)], rows);
        }
    }
    for b in 1..=n {
        for ch in 1..=c {
            let rows = (1..=n).map(|a| bx.marginal_yz(a, b, ch)).collect();
            push(Condition::YzIndependentOfA, [None, Some(b), Some(ch)], rows);
        }
    }
    Ok(out)
}

/// Errors with [`Error::Signaling`] unless the box passes at `CERTIFY_TOL`.
pub fn certify(bx: &NsBox) -> Result<()> {
    let v = check_nonsignaling(bx, CERTIFY_TOL)?;
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Signaling(v.len()))
    }
}
