//! Scripted Circle-of-Willis and single-bifurcation phantoms with known
//! nodes and variants.
//!
//! Segment labels meet inside "label zones": spheres around each junction in
//! which the branching vessels carry the host vessel's label, so that label
//! boundaries sit a short way down each branch as in manual annotations.

use super::{rasterize_tubes, rotate, Tube};
use crate::anatomy::{Segment, Side, VesselKind};
use crate::graph_builder::{AnatomicalNode, NodeType};
use crate::util::{add, cross, dist, normalized, scale, sub};
use crate::variants::{
    AnteriorVariants, FetalVariants, Fenestrations, PosteriorVariants, VariantReport,
};
use crate::volume_io::{Grid, LabeledMask, Vec3, Volume};

/// Zone radius relative to the host vessel radius.
pub const ZONE_FACTOR: f64 = 1.2;

/// Variant flags and placement of a synthetic Circle of Willis. Paired
/// flags are indexed `[right, left]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CowPhantomSpec {
    pub a1: [bool; 2],
    pub p1: [bool; 2],
    pub pcom: [bool; 2],
    pub fetal: [bool; 2],
    pub acom: bool,
    pub third_a2: bool,
    pub fenestrations: Fenestrations,
    pub rotation: [[f64; 3]; 3],
    pub shift: Vec3,
    pub radius_scale: f64,
    pub spacing: f64,
    /// Fixed grid size centred on the geometry; sized to fit when `None`.
    pub dims: Option<[usize; 3]>,
}

impl Default for CowPhantomSpec {
    fn default() -> Self {
        CowPhantomSpec {
            a1: [true; 2],
            p1: [true; 2],
            pcom: [true; 2],
            fetal: [false; 2],
            acom: true,
            third_a2: false,
            fenestrations: Fenestrations::default(),
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            shift: [0.0; 3],
            radius_scale: 1.0,
            spacing: 0.25,
            dims: None,
        }
    }
}

impl CowPhantomSpec {
    /// Reject combinations that would leave a vessel floating or place
    /// two structures on top of each other.
    pub fn validate(&self) -> Result<(), String> {
        for i in 0..2 {
            if self.fetal[i] && !self.pcom[i] {
                return Err("fetal PCA needs a Pcom".into());
            }
            if !self.p1[i] && !self.pcom[i] {
                return Err("PCA without P1 needs a Pcom".into());
            }
            if !self.a1[i] && !self.acom {
                return Err("ACA without A1 needs an Acom".into());
            }
        }
        if !self.a1[0] && !self.a1[1] {
            return Err("at least one A1 is required".into());
        }
        if !self.p1[0] && !self.p1[1] {
            return Err("at least one P1 is required".into());
        }
        if self.third_a2 && !self.acom {
            return Err("3rd-A2 arises from the Acom".into());
        }
        let f = self.fenestrations;
        if f.acom && (!self.acom || self.third_a2) {
            return Err("Acom fenestration needs an Acom without 3rd-A2".into());
        }
        if (f.r_a1 && !self.a1[0]) || (f.l_a1 && !self.a1[1]) {
            return Err("A1 fenestration needs that A1".into());
        }
        if (f.r_p1 && !self.p1[0]) || (f.l_p1 && !self.p1[1]) {
            return Err("P1 fenestration needs that P1".into());
        }
        if !(self.radius_scale > 0.0 && self.spacing > 0.0) {
            return Err("radius scale and spacing must be positive".into());
        }
        Ok(())
    }

    /// The variant report the phantom is built to exhibit.
    pub fn expected_variants(&self) -> VariantReport {
        VariantReport {
            anterior: AnteriorVariants {
                l_a1: self.a1[1],
                acom: self.acom,
                third_a2: self.third_a2,
                r_a1: self.a1[0],
            },
            posterior: PosteriorVariants {
                l_pcom: self.pcom[1],
                l_p1: self.p1[1],
                r_p1: self.p1[0],
                r_pcom: self.pcom[0],
            },
            fetal: FetalVariants {
                l_pca: self.fetal[1],
                r_pca: self.fetal[0],
            },
            fenestrations: self.fenestrations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CowPhantom {
    pub mask: LabeledMask,
    pub variants: VariantReport,
    /// Reference node positions; `id` is meaningless here.
    pub nodes: Vec<AnatomicalNode>,
    pub tubes: Vec<Tube>,
}

#[derive(Debug, Clone)]
struct Zone {
    center: Vec3,
    radius: f64,
    host: u8,
    children: Vec<u8>,
}

struct Builder {
    tubes: Vec<Tube>,
    zones: Vec<Zone>,
    nodes: Vec<AnatomicalNode>,
}

impl Builder {
    fn node(&mut self, seg: Segment, node_type: NodeType, name: &str, coords: Vec3) {
        let degree = match node_type {
            NodeType::Start | NodeType::End => 1,
            NodeType::Boundary => 2,
            NodeType::Bifurcation => 3,
        };
        self.nodes.push(AnatomicalNode {
            id: 0,
            degree,
            label: seg.code(),
            node_type,
            coords,
            name: name.to_string(),
        });
    }

    /// Boundary node pair where `child` leaves the zone of `host` at `at`.
    fn boundary(&mut self, host: Segment, child: Segment, at: Vec3) {
        self.node(host, NodeType::Boundary, &format!("{} boundary", host.relative_name(child)), at);
        self.node(child, NodeType::Boundary, &format!("{} boundary", child.relative_name(host)), at);
    }

    /// Straight tube from `a` to `b`, split into two channels over its
    /// middle when `fenestrated`.
    fn segment(&mut self, label: u8, a: Vec3, b: Vec3, r: f64, fenestrated: bool) {
        if !fenestrated {
            self.tubes.push(Tube::new(label, vec![a, b], r));
            return;
        }
        let d = sub(b, a);
        let n = normalized(cross(d, [0.0, 0.0, 1.0]))
            .or_else(|| normalized(cross(d, [1.0, 0.0, 0.0])))
            .expect("non-degenerate segment");
        let rf = (0.6 * r).max(0.5);
        let delta = rf + 0.5;
        let u = add(a, scale(d, 0.3));
        let v = add(a, scale(d, 0.7));
        let m = add(a, scale(d, 0.5));
        self.tubes.push(Tube::new(label, vec![a, u], r));
        self.tubes.push(Tube::new(label, vec![v, b], r));
        for sgn in [1.0, -1.0] {
            let c = add(m, scale(n, sgn * delta));
            self.tubes.push(Tube::new(label, vec![u, c, v], rf));
        }
    }
}

fn along(from: Vec3, to: Vec3, t: f64) -> Vec3 {
    add(from, scale(normalized(sub(to, from)).expect("distinct points"), t))
}

fn sided(kind: VesselKind, side: Side) -> Segment {
    Segment::sided(kind, side).expect("paired kind")
}

/// Build the phantom described by `spec`.
///
/// # Panics
/// If `spec` fails [`CowPhantomSpec::validate`].
pub fn cow_phantom(spec: &CowPhantomSpec) -> CowPhantom {
    if let Err(e) = spec.validate() {
        panic!("invalid phantom spec: {e}");
    }
    let k = spec.radius_scale;
    let mut b = Builder {
        tubes: Vec::new(),
        zones: Vec::new(),
        nodes: Vec::new(),
    };
    let ba = Segment::Ba;
    let (ba0, babif) = ([0.0, -12.0, -12.0], [0.0, -12.0, 0.0]);
    let r_ba = 1.4 * k;
    b.tubes.push(Tube::new(ba.code(), vec![ba0, babif], r_ba));
    b.node(ba, NodeType::Start, "BA start", ba0);
    if spec.p1[0] && spec.p1[1] {
        b.node(ba, NodeType::Bifurcation, "BA bifurcation", babif);
    }
    let zone_ba = ZONE_FACTOR * r_ba;
    b.zones.push(Zone {
        center: babif,
        radius: zone_ba,
        host: ba.code(),
        children: vec![Segment::RPca.code(), Segment::LPca.code()],
    });

    let fen = spec.fenestrations;
    let acom_ends = [[3.0, 8.0, 3.0], [-3.0, 8.0, 3.0]];
    for (i, side) in [Side::Right, Side::Left].into_iter().enumerate() {
        let s = if i == 0 { 1.0 } else { -1.0 };
        let (pca, ica, pcom) = (
            sided(VesselKind::Pca, side),
            sided(VesselKind::Ica, side),
            sided(VesselKind::Pcom, side),
        );
        let (mca, aca) = (sided(VesselKind::Mca, side), sided(VesselKind::Aca, side));
        let fetal = spec.fetal[i];

        // posterior
        let q = [7.0 * s, -13.0, 0.5];
        let r_p1 = if fetal { 0.8 } else { 1.0 } * k;
        let r_p2 = 0.95 * k;
        if spec.p1[i] {
            let fenestrated = if i == 0 { fen.r_p1 } else { fen.l_p1 };
            b.segment(pca.code(), babif, q, r_p1, fenestrated);
            b.boundary(ba, pca, along(babif, q, zone_ba));
        }
        let p2_end = [15.0 * s, -25.0, 3.0];
        b.tubes.push(Tube::new(pca.code(), vec![q, [12.0 * s, -18.0, 1.5], p2_end], r_p2));
        b.node(pca, NodeType::End, "PCA end", p2_end);

        // ICA and Pcom
        let (ica0, p, bif) = ([8.0 * s, -4.0, -12.0], [8.0 * s, -4.0, 0.0], [8.0 * s, 0.0, 3.0]);
        let r_ica = 1.9 * k;
        b.tubes.push(Tube::new(ica.code(), vec![ica0, p, bif], r_ica));
        b.node(ica, NodeType::Start, "ICA start", ica0);
        let zone_ica = ZONE_FACTOR * r_ica;
        if spec.pcom[i] {
            let r_pcom = if fetal { 1.1 } else { 0.6 } * k;
            b.tubes.push(Tube::new(pcom.code(), vec![p, q], r_pcom));
            b.zones.push(Zone {
                center: p,
                radius: zone_ica,
                host: ica.code(),
                children: vec![pcom.code()],
            });
            b.node(ica, NodeType::Bifurcation, "Pcom bifurcation", p);
            b.boundary(ica, pcom, along(p, q, zone_ica));
            let host_r = if spec.p1[i] { r_p1.max(r_p2) } else { r_p2 };
            let zone_pca = ZONE_FACTOR * host_r;
            b.zones.push(Zone {
                center: q,
                radius: zone_pca,
                host: pca.code(),
                children: vec![pcom.code()],
            });
            if spec.p1[i] {
                b.node(pca, NodeType::Bifurcation, "Pcom bifurcation", q);
            }
            b.boundary(pca, pcom, along(q, p, zone_pca));
        }

        // ICA bifurcation
        let m1 = [14.0 * s, 1.0, 3.5];
        let mca_end = [20.0 * s, 2.0, 4.0];
        b.tubes.push(Tube::new(mca.code(), vec![bif, m1, mca_end], 1.3 * k));
        b.node(mca, NodeType::End, "MCA end", mca_end);
        b.boundary(ica, mca, along(bif, m1, zone_ica));
        let a = acom_ends[i];
        let r_aca = 1.0 * k;
        let mut children = vec![mca.code()];
        if spec.a1[i] {
            let fenestrated = if i == 0 { fen.r_a1 } else { fen.l_a1 };
            b.segment(aca.code(), bif, a, r_aca, fenestrated);
            b.boundary(ica, aca, along(bif, a, zone_ica));
            b.node(ica, NodeType::Bifurcation, "ICA bifurcation", bif);
            children.push(aca.code());
        }
        b.zones.push(Zone {
            center: bif,
            radius: zone_ica,
            host: ica.code(),
            children,
        });
        let aca_end = [4.0 * s, 20.0, 8.0];
        b.tubes.push(Tube::new(aca.code(), vec![a, [3.5 * s, 14.0, 5.0], aca_end], r_aca));
        b.node(aca, NodeType::End, "ACA end", aca_end);
        if spec.acom {
            let zone_aca = ZONE_FACTOR * r_aca;
            b.zones.push(Zone {
                center: a,
                radius: zone_aca,
                host: aca.code(),
                children: vec![Segment::Acom.code()],
            });
            if spec.a1[i] {
                b.node(aca, NodeType::Bifurcation, "Acom bifurcation", a);
            }
            b.boundary(aca, Segment::Acom, along(a, acom_ends[1 - i], zone_aca));
        }
    }

    if spec.acom {
        let r_acom = 0.75 * k;
        b.segment(Segment::Acom.code(), acom_ends[0], acom_ends[1], r_acom, fen.acom);
        if spec.third_a2 {
            let (o, t1, t_end) = ([0.0, 8.0, 3.0], [0.0, 14.0, 5.0], [0.0, 19.0, 7.0]);
            let third = Segment::ThirdA2;
            b.tubes.push(Tube::new(third.code(), vec![o, t1, t_end], 0.7 * k));
            let zone = ZONE_FACTOR * r_acom;
            b.zones.push(Zone {
                center: o,
                radius: zone,
                host: Segment::Acom.code(),
                children: vec![third.code()],
            });
            b.node(Segment::Acom, NodeType::Bifurcation, "3rd-A2 bifurcation", o);
            b.boundary(Segment::Acom, third, along(o, t1, zone));
            b.node(third, NodeType::End, "3rd-A2 end", t_end);
        }
    }

    let place = |p: Vec3| add(rotate(&spec.rotation, p), spec.shift);
    for t in &mut b.tubes {
        for p in &mut t.points {
            *p = place(*p);
        }
    }
    for z in &mut b.zones {
        z.center = place(z.center);
    }
    for n in &mut b.nodes {
        n.coords = place(n.coords);
    }
    let grid = fit_grid(&b.tubes, spec.spacing, spec.dims);
    let mask = apply_zones(rasterize_tubes(&grid, &b.tubes), &b.zones);
    b.nodes.sort_by(|x, y| (x.label, &x.name).cmp(&(y.label, &y.name)));
    CowPhantom {
        mask,
        variants: spec.expected_variants(),
        nodes: b.nodes,
        tubes: b.tubes,
    }
}

/// Axis-aligned grid covering all tubes with a 2 mm margin, or a grid of
/// fixed `dims` centred on them.
pub(crate) fn fit_grid(tubes: &[Tube], spacing: f64, dims: Option<[usize; 3]>) -> Grid {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for t in tubes {
        let r = t.radii.iter().cloned().fold(0.0, f64::max) + 2.0;
        for p in &t.points {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d] - r);
                hi[d] = hi[d].max(p[d] + r);
            }
        }
    }
    let dims = dims.unwrap_or_else(|| [0, 1, 2].map(|d| ((hi[d] - lo[d]) / spacing).ceil() as usize + 1));
    let center = [0, 1, 2].map(|d| (lo[d] + hi[d]) / 2.0);
    // snap the origin to the spacing lattice so placement is reproducible
    let origin = [0, 1, 2].map(|d| ((center[d] - (dims[d] as f64 - 1.0) * spacing / 2.0) / spacing).round() * spacing);
    Grid::new(dims, [spacing; 3]).with_origin(origin)
}

fn apply_zones(mask: LabeledMask, zones: &[Zone]) -> LabeledMask {
    let grid = mask.grid().clone();
    let mut data = mask.into_volume().into_data();
    for z in zones {
        let a = grid.continuous_index(sub(z.center, [z.radius; 3]));
        let c = grid.continuous_index(add(z.center, [z.radius; 3]));
        let range = |d: usize| {
            let from = (a[d].min(c[d]).floor().max(0.0)) as usize;
            let to = (a[d].max(c[d]).ceil().max(0.0) as usize).min(grid.dims[d] - 1);
            from..=to
        };
        for zz in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let i = grid.index(x, y, zz);
                    if z.children.contains(&data[i]) && dist(grid.world_of_index(i), z.center) <= z.radius {
                        data[i] = z.host;
                    }
                }
            }
        }
    }
    LabeledMask::new(Volume::new(grid, data).expect("sized to grid")).expect("permitted labels")
}

/// A single BA bifurcation: parent along +z ending at the origin, children
/// leaving at `half_angle_deg` either side of the parent direction in the
/// x-z plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationSpec {
    pub r_parent: f64,
    pub r_children: [f64; 2],
    pub half_angle_deg: f64,
    pub length: f64,
    pub spacing: f64,
    pub rotation: [[f64; 3]; 3],
}

impl Default for BifurcationSpec {
    fn default() -> Self {
        BifurcationSpec {
            r_parent: 2.0,
            r_children: [1.4749; 2],
            half_angle_deg: 50.0,
            length: 12.0,
            spacing: 0.25,
            rotation: CowPhantomSpec::default().rotation,
        }
    }
}

/// Y phantom labeled BA / R-PCA / L-PCA with a label zone at the junction.
pub fn bifurcation_phantom(spec: &BifurcationSpec) -> CowPhantom {
    let a = spec.half_angle_deg.to_radians();
    let (sa, ca) = a.sin_cos();
    let o = [0.0; 3];
    let start = [0.0, 0.0, -spec.length];
    let ends = [
        [spec.length * sa, 0.0, spec.length * ca],
        [-spec.length * sa, 0.0, spec.length * ca],
    ];
    let mut b = Builder {
        tubes: vec![Tube::new(Segment::Ba.code(), vec![start, o], spec.r_parent)],
        zones: Vec::new(),
        nodes: Vec::new(),
    };
    let zone = ZONE_FACTOR * spec.r_parent;
    b.zones.push(Zone {
        center: o,
        radius: zone,
        host: Segment::Ba.code(),
        children: vec![Segment::RPca.code(), Segment::LPca.code()],
    });
    b.node(Segment::Ba, NodeType::Start, "BA start", start);
    b.node(Segment::Ba, NodeType::Bifurcation, "BA bifurcation", o);
    for (i, seg) in [Segment::RPca, Segment::LPca].into_iter().enumerate() {
        b.tubes.push(Tube::new(seg.code(), vec![o, ends[i]], spec.r_children[i]));
        b.boundary(Segment::Ba, seg, along(o, ends[i], zone));
        b.node(seg, NodeType::End, "PCA end", ends[i]);
    }
    let place = |p: Vec3| rotate(&spec.rotation, p);
    for t in &mut b.tubes {
        for p in &mut t.points {
            *p = place(*p);
        }
    }
    for z in &mut b.zones {
        z.center = place(z.center);
    }
    for n in &mut b.nodes {
        n.coords = place(n.coords);
    }
    let grid = fit_grid(&b.tubes, spec.spacing, None);
    let mask = apply_zones(rasterize_tubes(&grid, &b.tubes), &b.zones);
    b.nodes.sort_by(|x, y| (x.label, &x.name).cmp(&(y.label, &y.name)));
    let variants = VariantReport {
        posterior: PosteriorVariants {
            l_p1: true,
            r_p1: true,
            ..Default::default()
        },
        ..Default::default()
    };
    CowPhantom {
        mask,
        variants,
        nodes: b.nodes,
        tubes: b.tubes,
    }
}
