//! Serializers that write vectors as plain arrays and matrices as row lists.

use serde::ser::{SerializeSeq, Serializer};

use crate::model::{Matrix, Vector};

pub fn vector<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn opt_vector<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => vector(v, s),
        None => s.serialize_none(),
    }
}

pub fn matrix<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub fn vectors<S: Serializer>(vs: &[Vector], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(v.as_slice())?;
    }
    seq.end()
}
