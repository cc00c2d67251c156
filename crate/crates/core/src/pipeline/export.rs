//! Output bundle writers: legacy VTK PolyData and JSON.
//!
//! Every number goes through 6-significant-digit rounding so the files
//! are byte-stable across platforms.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::anatomy::Segment;
use crate::graph_builder::{AnatomicalNode, CenterlineGraph, NodeType};
use crate::morphometry::{FeatureReport, SegmentRecord};
use crate::util::{atomic_write, fmt_sig6, mean, round_sig};
use crate::variants::VariantReport;

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x, 6))
    } else {
        Value::Null
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn write_json(v: &Value, path: &Path) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Mean of the defined per-point radii of an edge, 0 when none are.
fn edge_mean(r: &[Option<f64>]) -> f64 {
    let v: Vec<f64> = r.iter().flatten().copied().collect();
    mean(&v).unwrap_or(0.0)
}

/// Legacy ASCII VTK PolyData text for `g`.
pub fn vtk_polydata(g: &CenterlineGraph) -> String {
    let mut points = Vec::new();
    let mut degree = Vec::new();
    let mut lines = Vec::new();
    for e in &g.edges {
        let first = points.len();
        let n = e.points.len();
        for (i, p) in e.points.iter().enumerate() {
            points.push(*p);
            degree.push(match i {
                0 => g.nodes[e.nodes.0].degree,
                _ if i + 1 == n => g.nodes[e.nodes.1].degree,
                _ => 0,
            });
        }
        lines.push((first..first + n).collect::<Vec<_>>());
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncenterline graph\nASCII\nDATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {} float", points.len());
    for p in &points {
        let _ = writeln!(s, "{} {} {}", fmt_sig6(p[0]), fmt_sig6(p[1]), fmt_sig6(p[2]));
    }
    let size: usize = lines.iter().map(|l| l.len() + 1).sum();
    let _ = writeln!(s, "LINES {} {}", lines.len(), size);
    for l in &lines {
        s.push_str(&l.len().to_string());
        for i in l {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "POINT_DATA {}", points.len());
    s.push_str("SCALARS degree int 1\nLOOKUP_TABLE default\n");
    for d in &degree {
        let _ = writeln!(s, "{d}");
    }
    let _ = writeln!(s, "CELL_DATA {}", g.edges.len());
    s.push_str("SCALARS labels int 1\nLOOKUP_TABLE default\n");
    for e in &g.edges {
        let _ = writeln!(s, "{}", e.label);
    }
    for (name, get) in [
        ("ce_radius", (|e| &e.ce_radius) as fn(&crate::graph_builder::GraphEdge) -> &Vec<Option<f64>>),
        ("mis_radius", |e| &e.mis_radius),
    ] {
        let _ = writeln!(s, "SCALARS {name} float 1\nLOOKUP_TABLE default");
        for e in &g.edges {
            let _ = writeln!(s, "{}", fmt_sig6(edge_mean(get(e))));
        }
    }
    s
}

pub fn export_vtk_polydata(g: &CenterlineGraph, path: &Path) -> io::Result<()> {
    atomic_write(path, vtk_polydata(g).as_bytes())
}

pub fn node_json(nodes: &[AnatomicalNode]) -> Value {
    Value::Array(
        nodes
            .iter()
            .map(|n| {
                json!({
                    "id": n.id,
                    "name": n.name,
                    "degree": n.degree,
                    "label": n.label,
                    "segment": Segment::from_code(n.label).map_or("", |s| s.name()),
                    "node_type": n.node_type,
                    "coords_mm": n.coords.map(num),
                })
            })
            .collect(),
    )
}

pub fn export_node_json(nodes: &[AnatomicalNode], path: &Path) -> io::Result<()> {
    write_json(&node_json(nodes), path)
}

pub fn variant_json(v: &VariantReport) -> Value {
    serde_json::to_value(v).expect("plain booleans")
}

pub fn export_variant_json(v: &VariantReport, path: &Path) -> io::Result<()> {
    write_json(&variant_json(v), path)
}

fn segment_entry(s: &SegmentRecord) -> Value {
    let f = s.features.as_ref();
    json!({
        "name": s.name,
        "median_radius_mm": opt(f.and_then(|f| f.median_radius)),
        "length_mm": opt(f.map(|f| f.length)),
        "tortuosity": opt(f.map(|f| f.tortuosity)),
        "volume_mm3": opt(f.and_then(|f| f.volume)),
        "mean_curvature_per_mm": opt(f.map(|f| f.mean_curvature)),
        "fallback": s.fallback,
    })
}

pub fn feature_json(r: &FeatureReport) -> Value {
    let segments: Vec<Value> = r.segments.iter().map(segment_entry).collect();
    let bifurcations: Vec<Value> = r
        .bifurcations
        .iter()
        .map(|b| {
            let mut m = Map::new();
            m.insert("name".into(), json!(b.name));
            m.insert("angles_deg".into(), json!(b.angles.map(num)));
            if let Some(rf) = &b.radius {
                m.insert("radii_mm".into(), json!([num(rf.r_p), num(rf.r_c1), num(rf.r_c2)]));
                m.insert("radius_sum_ratio".into(), num(rf.radius_sum_ratio));
                m.insert("area_sum_ratio".into(), num(rf.area_sum_ratio));
                let ir = rf.individual_ratios;
                m.insert(
                    "individual_ratios".into(),
                    json!({"p_c1": num(ir.p_c1), "p_c2": num(ir.p_c2), "c1_c2": num(ir.c1_c2)}),
                );
                m.insert("exponent".into(), opt(rf.exponent));
            }
            m.insert("support_flags".into(), json!(b.support_flags));
            Value::Object(m)
        })
        .collect();
    json!({"segments": segments, "bifurcations": bifurcations})
}

pub fn export_feature_json(r: &FeatureReport, path: &Path) -> io::Result<()> {
    write_json(&feature_json(r), path)
}

/// Read back a nodes.json document.
pub fn parse_node_json(text: &str) -> Result<Vec<AnatomicalNode>, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let arr = v.as_array().ok_or("nodes.json: expected an array")?;
    arr.iter()
        .enumerate()
        .map(|(i, n)| {
            let field = |k: &str| n.get(k).ok_or_else(|| format!("node {i}: missing {k}"));
            let int = |k: &str| field(k)?.as_u64().ok_or_else(|| format!("node {i}: {k} is not an integer"));
            let coords = field("coords_mm")?
                .as_array()
                .filter(|a| a.len() == 3)
                .and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?, a[2].as_f64()?]))
                .ok_or_else(|| format!("node {i}: coords_mm must be 3 numbers"))?;
            let node_type = match field("node_type")?.as_str() {
                Some("start") => NodeType::Start,
                Some("end") => NodeType::End,
                Some("bifurcation") => NodeType::Bifurcation,
                Some("boundary") => NodeType::Boundary,
                other => return Err(format!("node {i}: unknown node_type {other:?}")),
            };
            let label = u8::try_from(int("label")?).map_err(|e| format!("node {i}: {e}"))?;
            Segment::from_code(label).ok_or_else(|| format!("node {i}: label {label} is not a segment"))?;
            Ok(AnatomicalNode {
                id: int("id")? as usize,
                degree: int("degree")? as usize,
                label,
                node_type,
                coords,
                name: field("name")?.as_str().unwrap_or_default().to_string(),
            })
        })
        .collect()
}

/// Contents of a legacy VTK PolyData file as written by [`vtk_polydata`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkPolyData {
    pub points: Vec<[f64; 3]>,
    pub lines: Vec<Vec<usize>>,
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

impl VtkPolyData {
    pub fn cell_scalar(&self, name: &str) -> Option<&[f64]> {
        self.cell_scalars.iter().find(|s| s.0 == name).map(|s| s.1.as_slice())
    }

    pub fn point_scalar(&self, name: &str) -> Option<&[f64]> {
        self.point_scalars.iter().find(|s| s.0 == name).map(|s| s.1.as_slice())
    }
}

/// Minimal reader for the ASCII PolyData subset this module writes.
pub fn parse_vtk_polydata(text: &str) -> Result<VtkPolyData, String> {
    let mut lines = text.lines();
    if lines.next() != Some("# vtk DataFile Version 3.0") {
        return Err("missing VTK header".into());
    }
    let mut toks = lines.skip(1).flat_map(str::split_whitespace);
    let mut next = || toks.next().ok_or_else(|| "unexpected end of file".to_string());
    let count = |t: &str| t.parse::<usize>().map_err(|e| format!("{t}: {e}"));
    let float = |t: &str| t.parse::<f64>().map_err(|e| format!("{t}: {e}"));
    let mut out = VtkPolyData::default();
    let (kw, ds) = (next()?, next()?);
    if kw != "ASCII" || ds != "DATASET" || next()? != "POLYDATA" {
        return Err("expected ASCII POLYDATA".into());
    }
    let mut section: Option<(bool, usize)> = None;
    while let Ok(tok) = next() {
        match tok {
            "POINTS" => {
                let n = count(next()?)?;
                next()?;
                for _ in 0..n {
                    out.points.push([float(next()?)?, float(next()?)?, float(next()?)?]);
                }
            }
            "LINES" => {
                let n = count(next()?)?;
                next()?;
                for _ in 0..n {
                    let k = count(next()?)?;
                    out.lines.push((0..k).map(|_| count(next()?)).collect::<Result<_, _>>()?);
                }
            }
            "POINT_DATA" | "CELL_DATA" => section = Some((tok == "POINT_DATA", count(next()?)?)),
            "SCALARS" => {
                let (is_point, n) = section.ok_or("SCALARS outside a data section")?;
                let name = next()?.to_string();
                next()?;
                let mut t = next()?;
                if t == "1" {
                    t = next()?;
                }
                if t == "LOOKUP_TABLE" {
                    next()?;
                }
                let vals = (0..n).map(|_| float(next()?)).collect::<Result<Vec<_>, _>>()?;
                if is_point {
                    out.point_scalars.push((name, vals));
                } else {
                    out.cell_scalars.push((name, vals));
                }
            }
            other => return Err(format!("unexpected token {other:?}")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_builder::test_util::graph;
    use crate::morphometry::{radius_features, BifurcationFeatures};

    fn five_point_edge() -> CenterlineGraph {
        let mut g = graph(&[[0.0; 3], [1.0, 0.0, 0.0]], &[(0, 1, 4)]);
        g.edges[0].points = (0..5).map(|i| [i as f64 * 0.25, 0.0, 0.0]).collect();
        g.edges[0].ce_radius = vec![Some(1.0), Some(2.0), None, Some(3.0), Some(2.0)];
        g.edges[0].mis_radius = vec![Some(1.0); 5];
        g
    }

    #[test]
    fn vtk_layout() {
        let text = vtk_polydata(&five_point_edge());
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("DATASET POLYDATA\nPOINTS 5 float\n"));
        assert!(text.contains("LINES 1 6\n5 0 1 2 3 4\n"));
        let v = parse_vtk_polydata(&text).unwrap();
        assert_eq!(v.point_scalar("degree").unwrap(), &[1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.cell_scalar("labels").unwrap(), &[4.0]);
        assert_eq!(v.cell_scalar("ce_radius").unwrap(), &[2.0]);
        assert_eq!(v.cell_scalar("mis_radius").unwrap(), &[1.0]);
    }

    #[test]
    fn vtk_round_trip_to_six_digits() {
        let mut g = five_point_edge();
        g.edges[0].points[2] = [std::f64::consts::PI, -1.0 / 3.0, 12345.6789];
        let v = parse_vtk_polydata(&vtk_polydata(&g)).unwrap();
        for (a, b) in v.points.iter().zip(&g.edges[0].points) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 5e-6 * b[c].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn node_entries() {
        let n = AnatomicalNode {
            id: 7,
            degree: 3,
            label: 1,
            node_type: NodeType::Bifurcation,
            coords: [1.0 / 3.0, 0.0, 2.0],
            name: "BA bifurcation".into(),
        };
        let v = node_json(&[n]);
        assert_eq!(v[0]["degree"], 3);
        assert_eq!(v[0]["segment"], "BA");
        assert_eq!(v[0]["node_type"], "bifurcation");
        assert_eq!(serde_json::to_string(&v[0]["coords_mm"]).unwrap(), "[0.333333,0.0,2.0]");
        let back = parse_node_json(&v.to_string()).unwrap();
        assert_eq!(back[0].name, "BA bifurcation");
        assert_eq!(back[0].coords[0], 0.333333);
        assert!(parse_node_json("[{}]").is_err());
    }

    #[test]
    fn variant_keys() {
        let v = variant_json(&VariantReport::default());
        assert_eq!(v["anterior"]["Acom"], false);
        for k in ["L-A1", "Acom", "3rd-A2", "R-A1"] {
            assert!(v["anterior"].get(k).is_some(), "{k}");
        }
        for k in ["L-Pcom", "L-P1", "R-P1", "R-Pcom"] {
            assert!(v["posterior"].get(k).is_some(), "{k}");
        }
        assert!(v["fetal"].get("L-PCA").is_some() && v["fenestrations"].is_object());
    }

    #[test]
    fn minor_bifurcations_omit_radius_fields() {
        let major = BifurcationFeatures {
            name: "BA bifurcation".into(),
            node: 0,
            coords: [0.0; 3],
            angles: [120.0; 3],
            radius: Some(radius_features(5.0, 4.0, 3.0, 1.0, 1.0)),
            support_flags: vec![],
        };
        let minor = BifurcationFeatures {
            name: "R-ACA Acom bifurcation".into(),
            radius: None,
            ..major.clone()
        };
        let r = FeatureReport {
            bifurcations: vec![major, minor],
            ..Default::default()
        };
        let v = feature_json(&r);
        assert_eq!(v["bifurcations"][0]["exponent"], json!(2.0));
        assert_eq!(v["bifurcations"][0]["individual_ratios"]["c1_c2"], json!(1.33333));
        let m = v["bifurcations"][1].as_object().unwrap();
        for k in ["radius_sum_ratio", "area_sum_ratio", "individual_ratios", "exponent"] {
            assert!(!m.contains_key(k));
        }
        assert!(m.contains_key("angles_deg") && m.contains_key("support_flags"));
    }
}
