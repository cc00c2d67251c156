//! Reconnection stages: within a label, across adjacent labels, and a
//! final pass per mask component.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::astar::{closest_pair, rasterize_line, search};
use super::{nearest_label, AStarParams, ConnectError, VoxelPath};
use crate::anatomy::{labels_adjacent, ADJACENT_PAIRS};
use crate::skeletonizer::Skeleton;
use crate::volume_io::components::NEIGHBOR_OFFSETS_26;
use crate::volume_io::{
    euclidean_distance_field, sparse_components, Connectivity, DistanceField, Grid, LabeledMask,
};

/// Outcome of [`connect_all`].
#[derive(Debug, Clone)]
pub struct ConnectReport {
    pub skeleton: Skeleton,
    pub bridges: Vec<VoxelPath>,
    pub within_label: usize,
    pub cross_label: usize,
    pub per_component: usize,
    /// Mask components that carried no skeleton voxel and were seeded with
    /// their deepest voxel.
    pub seeded: usize,
    pub dilated_fallbacks: usize,
    pub raster_fallbacks: usize,
}

/// Reconnect a labeled skeleton against its mask, computing the boundary
/// distance field from the mask.
pub fn connect_all(
    s: &Skeleton,
    m: &LabeledMask,
    params: &AStarParams,
) -> Result<ConnectReport, ConnectError> {
    let field = euclidean_distance_field(&m.binary());
    connect_all_with_field(s, m, &field, params)
}

struct State<'a> {
    grid: Grid,
    mask: &'a LabeledMask,
    field: &'a DistanceField,
    params: AStarParams,
    skel: Vec<u8>,
    voxels: BTreeSet<usize>,
    report: ConnectReport,
}

/// Reconnect a labeled skeleton (values are label codes).
///
/// 1. Within each label: while the label's skeleton voxels form several
///    components inside one connected piece of (label region ∪ label
///    skeleton), join the closest two.
/// 2. Across anatomically adjacent labels whose regions touch but whose
///    skeleton parts are not connected through the pair and their other
///    anatomical neighbours: join the closest voxels of the two parts inside
///    the union of both regions.
/// 3. Per connected piece of (mask ∪ skeleton): join any remaining
///    components; a piece without skeleton gets its deepest voxel.
///
/// A search that fails inside its domain is retried in the domain dilated
/// by one voxel, and finally replaced by a straight voxel line.
pub fn connect_all_with_field(
    s: &Skeleton,
    m: &LabeledMask,
    field: &DistanceField,
    params: &AStarParams,
) -> Result<ConnectReport, ConnectError> {
    s.grid().ensure_same_lattice(m.grid())?;
    s.grid().ensure_same_lattice(field.grid())?;
    let skel = s.volume().data().to_vec();
    let voxels: BTreeSet<usize> = s.voxels().into_iter().collect();
    let mut st = State {
        grid: s.grid().clone(),
        mask: m,
        field,
        params: *params,
        skel,
        voxels,
        report: ConnectReport {
            skeleton: s.clone(),
            bridges: Vec::new(),
            within_label: 0,
            cross_label: 0,
            per_component: 0,
            seeded: 0,
            dilated_fallbacks: 0,
            raster_fallbacks: 0,
        },
    };

    let mut by_label: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in m.volume().data().iter().enumerate() {
        if l != 0 {
            by_label.entry(l).or_default().push(i);
        }
    }

    st.within_label_stage(&by_label);
    st.cross_label_stage(&by_label);
    st.per_component_stage(&by_label);

    let volume = s.volume().with_data(st.skel)?;
    st.report.skeleton = Skeleton::new(volume);
    Ok(st.report)
}

impl State<'_> {
    fn mask_data(&self) -> &[u8] {
        self.mask.volume().data()
    }

    fn label_voxels(&self, l: u8) -> Vec<usize> {
        self.voxels
            .iter()
            .copied()
            .filter(|&i| self.skel[i] == l)
            .collect()
    }

    fn within_label_stage(&mut self, by_label: &BTreeMap<u8, Vec<usize>>) {
        let labels: BTreeSet<u8> = self.voxels.iter().map(|&i| self.skel[i]).collect();
        for l in labels {
            let skel_l = self.label_voxels(l);
            let mut domain_list = by_label.get(&l).cloned().unwrap_or_default();
            domain_list.extend_from_slice(&skel_l);
            let (mask, skel) = (self.mask_data(), &self.skel);
            let pieces = sparse_components(
                &self.grid,
                &domain_list,
                |i| mask[i] == l || skel[i] == l,
                Connectivity::TwentySix,
            );
            let mut piece_of: HashMap<usize, usize> = HashMap::new();
            for (k, p) in pieces.iter().enumerate() {
                for &v in p {
                    piece_of.insert(v, k);
                }
            }
            loop {
                let skel_l = self.label_voxels(l);
                let skel = &self.skel;
                let comps =
                    sparse_components(&self.grid, &skel_l, |i| skel[i] == l, Connectivity::TwentySix);
                let mut groups: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
                for c in comps {
                    groups.entry(piece_of[&c[0]]).or_default().push(c);
                }
                let Some((&piece, group)) = groups.iter().find(|(_, g)| g.len() > 1) else {
                    break;
                };
                let (a, b) = closest_components(&self.grid, group);
                let in_piece = |i: usize| piece_of.get(&i) == Some(&piece);
                self.bridge(&group[a], &group[b], in_piece);
                self.report.within_label += 1;
            }
        }
    }

    fn cross_label_stage(&mut self, by_label: &BTreeMap<u8, Vec<usize>>) {
        for &(sa, sb) in &ADJACENT_PAIRS {
            let (a, b) = (sa.code(), sb.code());
            let part_a = self.label_voxels(a);
            let part_b = self.label_voxels(b);
            if part_a.is_empty() || part_b.is_empty() {
                continue;
            }
            if !self.regions_touch(by_label, a, b) || self.parts_connected(a, b) {
                continue;
            }
            let (mask, skel) = (self.mask_data(), &self.skel);
            let domain = |i: usize| {
                let (mv, sv) = (mask[i], skel[i]);
                mv == a || mv == b || sv == a || sv == b
            };
            let domain: Vec<bool> = (0..self.grid.len()).map(domain).collect();
            self.bridge(&part_a, &part_b, |i| domain[i]);
            self.report.cross_label += 1;
        }
    }

    fn per_component_stage(&mut self, by_label: &BTreeMap<u8, Vec<usize>>) {
        let mut list: Vec<usize> = by_label.values().flatten().copied().collect();
        list.extend(self.voxels.iter().copied());
        let (mask, skel) = (self.mask_data(), &self.skel);
        let pieces = sparse_components(
            &self.grid,
            &list,
            |i| mask[i] != 0 || skel[i] != 0,
            Connectivity::TwentySix,
        );
        for piece in pieces {
            let in_piece: BTreeSet<usize> = piece.iter().copied().collect();
            let mut has_skeleton = piece.iter().any(|&i| self.skel[i] != 0);
            if !has_skeleton {
                let deepest = piece
                    .iter()
                    .copied()
                    .max_by(|&x, &y| self.field.at(x).total_cmp(&self.field.at(y)).then(y.cmp(&x)))
                    .expect("non-empty component");
                let l = self.mask_data()[deepest];
                if l != 0 {
                    self.skel[deepest] = l;
                    self.voxels.insert(deepest);
                    self.report.seeded += 1;
                    has_skeleton = true;
                }
            }
            if !has_skeleton {
                continue;
            }
            loop {
                let skel_here: Vec<usize> = piece.iter().copied().filter(|&i| self.skel[i] != 0).collect();
                let skel = &self.skel;
                let comps =
                    sparse_components(&self.grid, &skel_here, |i| skel[i] != 0, Connectivity::TwentySix);
                if comps.len() <= 1 {
                    break;
                }
                let (a, b) = closest_components(&self.grid, &comps);
                self.bridge(&comps[a], &comps[b], |i| in_piece.contains(&i));
                self.report.per_component += 1;
            }
        }
    }

    /// Whether some voxel of region `a` is a 26-neighbour of region `b`.
    fn regions_touch(&self, by_label: &BTreeMap<u8, Vec<usize>>, a: u8, b: u8) -> bool {
        let mask = self.mask_data();
        let Some(ra) = by_label.get(&a) else {
            return false;
        };
        ra.iter().any(|&i| {
            let c = self.grid.coords(i);
            NEIGHBOR_OFFSETS_26.iter().any(|o| {
                self.grid
                    .checked_index([c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]])
                    .is_some_and(|j| mask[j] == b)
            })
        })
    }

    /// Whether the skeleton parts of `a` and `b` connect through voxels
    /// labeled `a`, `b`, or any anatomical neighbour of either. Paths
    /// through the neighbours cover junction voxels whose label belongs to
    /// a third branch.
    fn parts_connected(&self, a: u8, b: u8) -> bool {
        let allowed = |l: u8| l == a || l == b || labels_adjacent(l, a) || labels_adjacent(l, b);
        let list: Vec<usize> = self
            .voxels
            .iter()
            .copied()
            .filter(|&i| allowed(self.skel[i]))
            .collect();
        let skel = &self.skel;
        let comps = sparse_components(
            &self.grid,
            &list,
            |i| skel[i] != 0 && allowed(skel[i]),
            Connectivity::TwentySix,
        );
        comps.iter().any(|c| {
            c.iter().any(|&i| self.skel[i] == a) && c.iter().any(|&i| self.skel[i] == b)
        })
    }

    /// Connect two voxel sets, widening the domain on failure, and add the
    /// path to the skeleton.
    fn bridge(&mut self, a: &[usize], b: &[usize], domain: impl Fn(usize) -> bool) {
        let (p, q, _) = closest_pair(&self.grid, a, b).expect("non-empty parts");
        let skel = &self.skel;
        let within = |i: usize| domain(i) || skel[i] != 0;
        let path = match search(&self.grid, p, q, b, within, self.field, &self.params) {
            Ok(path) => path,
            Err(_) => {
                let grid = &self.grid;
                let dilated = |i: usize| {
                    within(i)
                        || {
                            let c = grid.coords(i);
                            NEIGHBOR_OFFSETS_26.iter().any(|o| {
                                grid.checked_index([
                                    c[0] as i64 + o[0],
                                    c[1] as i64 + o[1],
                                    c[2] as i64 + o[2],
                                ])
                                .is_some_and(&within)
                            })
                        }
                };
                match search(&self.grid, p, q, b, dilated, self.field, &self.params) {
                    Ok(path) => {
                        self.report.dilated_fallbacks += 1;
                        log::warn!("bridge needed a dilated search domain");
                        path
                    }
                    Err(_) => {
                        self.report.raster_fallbacks += 1;
                        log::warn!("bridge fell back to a straight voxel line");
                        rasterize_line(&self.grid, p, q)
                    }
                }
            }
        };
        let fallback_label = self.skel[p];
        for &v in &path.voxels {
            if self.skel[v] == 0 {
                let l = nearest_label(self.mask, v).map_or(fallback_label, |(l, _)| l);
                self.skel[v] = l;
                self.voxels.insert(v);
            }
        }
        self.report.bridges.push(path);
    }
}

/// Indices of the two components with the smallest separation; ties go to
/// the earlier pair.
fn closest_components(grid: &Grid, comps: &[Vec<usize>]) -> (usize, usize) {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            if let Some((_, _, d)) = closest_pair(grid, &comps[i], &comps[j]) {
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
    }
    let (_, i, j) = best.expect("at least two components");
    (i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connector::transfer_labels;
    use crate::volume_io::{count_components, Volume};

    fn tube_mask(g: &Grid, label_of: impl Fn(usize, usize, usize) -> u8) -> LabeledMask {
        let mut v = Volume::filled(g.clone(), 0u8);
        let [nx, ny, nz] = g.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    v.set(x, y, z, label_of(x, y, z));
                }
            }
        }
        LabeledMask::new(v).unwrap()
    }

    fn line_skeleton(g: &Grid, xs: impl Iterator<Item = usize>, y: usize, z: usize) -> Skeleton {
        let mut v = Volume::filled(g.clone(), 0u8);
        for x in xs {
            v.set(x, y, z, 1);
        }
        Skeleton::new(v)
    }

    #[test]
    fn fragments_in_one_label_are_joined() {
        let g = Grid::new([40, 9, 9], [0.25; 3]);
        let m = tube_mask(&g, |x, y, z| {
            let (dy, dz) = (y as f64 - 4.0, z as f64 - 4.0);
            if (1..39).contains(&x) && dy * dy + dz * dz <= 9.0 {
                4
            } else {
                0
            }
        });
        let xs = (2..38).filter(|x| ![6, 7, 13, 20, 21, 22, 30].contains(x));
        let s = transfer_labels(&line_skeleton(&g, xs, 4, 4), &m).unwrap();
        assert_eq!(count_components(s.volume()), 5);
        let r = connect_all(&s, &m, &AStarParams::default()).unwrap();
        assert_eq!(count_components(r.skeleton.volume()), 1);
        assert_eq!(r.raster_fallbacks + r.dilated_fallbacks, 0);
        for i in r.skeleton.voxels() {
            assert_ne!(m.volume().data()[i], 0);
        }
    }

    #[test]
    fn connected_skeleton_is_unchanged() {
        let g = Grid::new([20, 7, 7], [0.25; 3]);
        let m = tube_mask(&g, |x, y, z| {
            u8::from((1..19).contains(&x) && (2..5).contains(&y) && (2..5).contains(&z)) * 4
        });
        let s = transfer_labels(&line_skeleton(&g, 2..18, 3, 3), &m).unwrap();
        let r = connect_all(&s, &m, &AStarParams::default()).unwrap();
        assert_eq!(r.skeleton, s);
        assert!(r.bridges.is_empty());
    }

    #[test]
    fn touching_labels_get_one_bridge() {
        // label 1 (BA) for x < 20, label 2 (R-PCA) beyond; skeleton gap
        // straddles the interface
        let g = Grid::new([40, 9, 9], [0.25; 3]);
        let m = tube_mask(&g, |x, y, z| {
            let (dy, dz) = (y as f64 - 4.0, z as f64 - 4.0);
            if (1..39).contains(&x) && dy * dy + dz * dz <= 9.0 {
                if x < 20 {
                    1
                } else {
                    2
                }
            } else {
                0
            }
        });
        let xs = (2..38).filter(|x| !(17..23).contains(x));
        let s = transfer_labels(&line_skeleton(&g, xs, 4, 4), &m).unwrap();
        let r = connect_all(&s, &m, &AStarParams::default()).unwrap();
        assert_eq!(r.cross_label, 1);
        assert_eq!(r.within_label, 0);
        assert_eq!(count_components(r.skeleton.volume()), 1);
        // bridge voxels carry the label of the region they sit in
        assert_eq!(r.skeleton.volume().get(18, 4, 4), 1);
        assert_eq!(r.skeleton.volume().get(21, 4, 4), 2);
    }

    #[test]
    fn empty_component_gets_seeded() {
        let g = Grid::new([30, 9, 9], [0.25; 3]);
        let m = tube_mask(&g, |x, y, z| {
            let inside = (2..7).contains(&y) && (2..7).contains(&z);
            if inside && (1..10).contains(&x) {
                4
            } else if inside && (15..28).contains(&x) {
                6
            } else {
                0
            }
        });
        let s = transfer_labels(&line_skeleton(&g, 2..9, 4, 4), &m).unwrap();
        let r = connect_all(&s, &m, &AStarParams::default()).unwrap();
        assert_eq!(r.seeded, 1);
        assert_eq!(count_components(r.skeleton.volume()), 2);
    }
}
